// SPDX-License-Identifier: Apache-2.0

#include "saccade/tape.hpp"

namespace saccade::ad {

void Tape::record(std::function<void()> backward, std::initializer_list<Tensor> touched) {
  if (!recording()) return;
  Entry e;
  e.backward = std::move(backward);
  e.touched.assign(touched.begin(), touched.end());
  entries_.push_back(std::move(e));
}

void Tape::backward(Tensor loss) {
  check(loss.numel() == 1, "backward() expects a scalar loss");
  // Intermediate gradients persist after the replay, so a second replay of
  // the same graph would double-count them.
  check(!backward_ran_, "backward() already ran on this tape; reset() first");
  backward_ran_ = true;
  loss.grad()[0] += 1.0f;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->backward();
  }
}

void Tape::reset() {
  for (auto& e : entries_) {
    for (auto& t : e.touched) t.drop_grad();
  }
  entries_.clear();
  backward_ran_ = false;
}

}  // namespace saccade::ad
