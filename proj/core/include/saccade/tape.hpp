// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode tape. One tape per forward episode; ops append a backward
// closure as they execute, backward() replays them in reverse. A tape and
// the tensors recorded on it belong to a single thread.

#pragma once

#include <functional>
#include <vector>

#include "saccade/tensor.hpp"

namespace saccade::ad {

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_ && pause_depth_ == 0; }

  // Appends one recorded operation. `touched` lists every tensor whose grad
  // the closure may populate, so reset() can clear them.
  void record(std::function<void()> backward, std::initializer_list<Tensor> touched);

  // Seeds d(loss)/d(loss)=1 and replays all recorded ops newest-first.
  // At most one backward per recorded graph; reset() re-arms the tape.
  void backward(Tensor loss);

  // Clears recorded ops and the gradients they populated.
  void reset();

  std::size_t size() const { return entries_.size(); }

  class Pause {
   public:
    explicit Pause(Tape& t) : tape_(t) { ++tape_.pause_depth_; }
    ~Pause() { --tape_.pause_depth_; }
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape& tape_;
  };

 private:
  struct Entry {
    std::function<void()> backward;
    std::vector<Tensor> touched;
  };
  std::vector<Entry> entries_;
  bool recording_ = true;
  bool backward_ran_ = false;
  int pause_depth_ = 0;
};

}  // namespace saccade::ad

namespace saccade {
using ad::Tape;
}  // namespace saccade
