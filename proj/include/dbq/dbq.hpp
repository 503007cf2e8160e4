// Copyright 2026 The dbq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Everything except the HTTP service (dbq/service.hpp), which pulls in
// cpp-httplib.

#pragma once

#include "dbq/active_learning.hpp"
#include "dbq/artifact.hpp"
#include "dbq/attribution.hpp"
#include "dbq/baseline.hpp"
#include "dbq/classify.hpp"
#include "dbq/corpus.hpp"
#include "dbq/embedding.hpp"
#include "dbq/error.hpp"
#include "dbq/features.hpp"
#include "dbq/featurize.hpp"
#include "dbq/matrix.hpp"
#include "dbq/metrics.hpp"
#include "dbq/pipeline.hpp"
#include "dbq/random.hpp"
#include "dbq/render.hpp"
#include "dbq/sgns.hpp"
#include "dbq/shapley.hpp"
#include "dbq/synthetic.hpp"
#include "dbq/text.hpp"
#include "dbq/tree.hpp"
