// Copyright 2026 The fbmine Authors.
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

#ifndef FBMINE_FBMINE_HPP_
#define FBMINE_FBMINE_HPP_

#include "fbmine/analyze.hpp"
#include "fbmine/annotate.hpp"
#include "fbmine/build.hpp"
#include "fbmine/config.hpp"
#include "fbmine/core.hpp"
#include "fbmine/detect.hpp"
#include "fbmine/error.hpp"
#include "fbmine/gateway.hpp"
#include "fbmine/ingest.hpp"
#include "fbmine/labels_io.hpp"
#include "fbmine/metrics.hpp"
#include "fbmine/parallel.hpp"
#include "fbmine/winrate.hpp"

#endif  // FBMINE_FBMINE_HPP_
