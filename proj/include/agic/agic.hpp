/**
 * Copyright 2026 The agic Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "agic/amplifier.hpp"
#include "agic/attention.hpp"
#include "agic/backend.hpp"
#include "agic/dataset.hpp"
#include "agic/decoder.hpp"
#include "agic/error.hpp"
#include "agic/image_io.hpp"
#include "agic/metrics.hpp"
#include "agic/pipeline.hpp"
