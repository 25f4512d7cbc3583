// mismatch_sv/mismatch_sv.hpp

// Copyright 2026  mismatch-sv authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "mismatch_sv/cluster.hpp"
#include "mismatch_sv/common.hpp"
#include "mismatch_sv/evalcal.hpp"
#include "mismatch_sv/io.hpp"
#include "mismatch_sv/plda.hpp"
#include "mismatch_sv/preprocess.hpp"
#include "mismatch_sv/scorenorm.hpp"
#include "mismatch_sv/simulator.hpp"
#include "mismatch_sv/types.hpp"
