// Copyright 2026-present the slim project
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
#pragma once

#include "slim/error.hpp"
#include "slim/eval.hpp"
#include "slim/index.hpp"
#include "slim/ingest.hpp"
#include "slim/model.hpp"
#include "slim/persist.hpp"
#include "slim/search.hpp"
#include "slim/synth.hpp"
