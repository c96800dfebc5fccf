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

// Hand-built 10-image evaluation corpus shared by the metric unit tests and
// the acceptance suite.

#include <string>
#include <vector>

namespace oracle {

struct ToyCase {
  std::string image_id;
  std::string candidate;
  std::vector<std::string> references;
};

inline const std::vector<ToyCase>& toy_corpus() {
  static const std::vector<ToyCase> cases{
      {"img01", "a dog runs on the grass",
       {"a dog runs on the grass", "the dog is running on green grass"}},
      {"img02", "two girls blowing bubbles",
       {"two young girls are blowing bubbles", "girls play with bubbles outside",
        "two girls blow bubbles in a park"}},
      {"img03", "a man a man rides a bike", {"a man rides a bike down the street"}},
      {"img04", "child water", {"a child plays in the water", "a kid is splashing in water"}},
      {"img05", "the cat sits", {"a white cat sits on a red mat", "the cat is sitting"}},
      {"img06", "people walking down a busy city street at night",
       {"people walk along a busy street", "a crowd of people on a city street at night",
        "pedestrians crossing a busy road"}},
      {"img07", "orange bus", {"a red car parked by the road"}},
      {"img08", "a brown dog and a black dog play with a ball",
       {"two dogs play with a ball", "a brown dog and a black dog chase a ball in the yard"}},
      {"img09", "a boy jumps into the pool",
       {"a boy jumps into a swimming pool", "a child leaps into the pool", "boy diving"}},
      {"img10", "a woman in a red dress dances on stage while a man plays guitar",
       {"a woman in red dances on a stage", "a man plays the guitar while a woman dances",
        "a performer in a red dress dancing"}},
  };
  return cases;
}

}  // namespace oracle
