// SPDX-License-Identifier: Apache-2.0
//
// Differentiation correctness: every primitive against the float64
// reference, worked examples with known closed forms, and the tape's
// accumulation, pause and reset semantics.

#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "grad_cases.hpp"
#include "oracle.hpp"
#include "saccade/ops.hpp"

using namespace saccade::ad;
using oracle::DTensor;
using oracle::random_tensor;

TEST_CASE("every primitive matches the float64 finite-difference reference") {
  for (const oracle::GradCase& c : oracle::primitive_grad_cases()) {
    CAPTURE(c.name);
    oracle::GradCheck r = oracle::run_case(c);
    INFO(c.name << ": max err " << r.max_err << " over " << r.probes << " probes, " << r.skipped
                << " redrawn");
    CHECK(r.probes >= 50);
    CHECK(r.max_err < c.tol);
  }
}

TEST_CASE("composed foveation-warp-sample-recognition gradients match the reference") {
  oracle::GradCase c = oracle::composed_pipeline_case();
  oracle::GradCheck r = oracle::run_case(c);
  INFO("max err " << r.max_err << " over " << r.probes << " probes");
  CHECK(r.probes >= 50);
  CHECK(r.max_err < c.tol);
}

TEST_CASE("cross entropy of uniform logits over four classes is ln 4") {
  Tape tape;
  Tensor logits = Tensor::zeros({2, 4});
  Tensor loss = softmax_cross_entropy(tape, logits, {0, 3});
  CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-6));
}

TEST_CASE("cross entropy vanishes when the label logit dominates by 20") {
  Tape tape;
  Tensor logits = Tensor::zeros({1, 4});
  logits.data()[2] = 20.0f;
  Tensor loss = softmax_cross_entropy(tape, logits, {2});
  CHECK(loss.item() >= 0.0f);
  CHECK(loss.item() < 1e-8f);
}

TEST_CASE("cross entropy rejects an out-of-range label") {
  Tape tape;
  Tensor logits = Tensor::zeros({1, 4});
  CHECK_THROWS(softmax_cross_entropy(tape, logits, {4}));
  CHECK_THROWS(softmax_cross_entropy(tape, logits, {-1}));
}

TEST_CASE("gru cell with all-zero parameters and inputs keeps a zero state") {
  Tape tape;
  GruParams p;
  p.wz = Tensor::zeros({3, 4}), p.uz = Tensor::zeros({4, 4}), p.bz = Tensor::zeros({4});
  p.wr = Tensor::zeros({3, 4}), p.ur = Tensor::zeros({4, 4}), p.br = Tensor::zeros({4});
  p.wc = Tensor::zeros({3, 4}), p.uc = Tensor::zeros({4, 4}), p.bc = Tensor::zeros({4});
  Tensor h = gru_cell(tape, Tensor::zeros({2, 4}), Tensor::zeros({2, 3}), p);
  for (float v : h.values()) CHECK(v == 0.0f);
}

TEST_CASE("a saturated update gate hands the state over to the candidate") {
  Tape tape;
  GruParams p;
  p.wz = Tensor::zeros({3, 4}), p.uz = Tensor::zeros({4, 4});
  p.bz = Tensor::full({4}, 20.0f);  // update gate pinned open
  p.wr = Tensor::zeros({3, 4}), p.ur = Tensor::zeros({4, 4}), p.br = Tensor::zeros({4});
  p.wc = random_tensor({3, 4}, 60, -1.0f, 1.0f, false);
  p.uc = random_tensor({4, 4}, 61, -1.0f, 1.0f, false);
  p.bc = random_tensor({4}, 62, -1.0f, 1.0f, false);

  Tensor state = random_tensor({2, 4}, 63, -1.0f, 1.0f, false);
  Tensor input = random_tensor({2, 3}, 64, -1.0f, 1.0f, false);
  Tensor out = gru_cell(tape, state, input, p);

  // candidate with reset gate at 0.5, computed in double
  DTensor dc = oracle::dtanh(oracle::dadd(
      oracle::dadd(oracle::dmatmul(DTensor::from(input), DTensor::from(p.wc)),
                   oracle::dmatmul(oracle::dmul_scalar(DTensor::from(state), 0.5),
                                   DTensor::from(p.uc))),
      oracle::dbias_add(DTensor::zeros({2, 4}), DTensor::from(p.bc))));
  for (std::size_t i = 0; i < out.numel(); ++i)
    CHECK(std::abs(static_cast<double>(out.values()[i]) - dc.v[i]) < 1e-3);
}

TEST_CASE("bilinear sampling at integer coordinates copies pixels exactly") {
  Tape tape;
  Tensor img = random_tensor({1, 2, 4, 5}, 65, 0.0f, 1.0f, false);
  Tensor sx = Tensor::from({2, 2}, {0.0f, 3.0f, 1.0f, 4.0f});
  Tensor sy = Tensor::from({2, 2}, {0.0f, 1.0f, 2.0f, 3.0f});
  Tensor out = grid_sample(tape, img, sx, sy);
  for (int ch = 0; ch < 2; ++ch) {
    const float* plane = img.data() + ch * 20;
    const float* o = out.data() + ch * 4;
    CHECK(o[0] == plane[0 * 5 + 0]);
    CHECK(o[1] == plane[1 * 5 + 3]);
    CHECK(o[2] == plane[2 * 5 + 1]);
    CHECK(o[3] == plane[3 * 5 + 4]);
  }
}

TEST_CASE("bilinear sampling at the midpoint of four pixels averages them") {
  Tape tape;
  Tensor img = Tensor::from({1, 1, 2, 2}, {0.0f, 1.0f, 2.0f, 3.0f});
  Tensor sx = Tensor::from({1, 1}, {0.5f});
  Tensor sy = Tensor::from({1, 1}, {0.5f});
  Tensor out = grid_sample(tape, img, sx, sy);
  CHECK(out.item() == 1.5f);
}

TEST_CASE("bilinear sampling clamps out-of-range coordinates to the edge") {
  Tape tape;
  Tensor img = Tensor::from({1, 1, 2, 3}, {0.0f, 1.0f, 2.0f, 3.0f, 4.0f, 5.0f});
  Tensor sx = Tensor::from({1, 3}, {-7.0f, 9.0f, 1.0f});
  Tensor sy = Tensor::from({1, 3}, {-7.0f, 9.0f, -2.0f});
  Tensor out = grid_sample(tape, img, sx, sy);
  CHECK(out.values()[0] == 0.0f);  // top-left
  CHECK(out.values()[1] == 5.0f);  // bottom-right
  CHECK(out.values()[2] == 1.0f);  // clamped to the top row
}

TEST_CASE("backward of a sum of losses equals the sum of separate backwards") {
  Tensor w = random_tensor({3, 2}, 71, -1.0f, 1.0f, false);
  // which: 0 = first loss, 1 = second, 2 = their sum; each run is its own graph
  auto grads_of = [&](int which) {
    Tensor x = random_tensor({2, 3}, 70, -1.0f, 1.0f, true);
    Tape tape;
    Tensor l1 = sum_all(tape, matmul(tape, x, w));
    Tensor l2 = sum_all(tape, mul(tape, x, x));
    x.zero_grad();
    tape.backward(which == 0 ? l1 : which == 1 ? l2 : add(tape, l1, l2));
    std::vector<float> g(x.grad_view().begin(), x.grad_view().end());
    tape.reset();
    return g;
  };
  std::vector<float> g1 = grads_of(0), g2 = grads_of(1), joint = grads_of(2);
  for (std::size_t i = 0; i < joint.size(); ++i)
    CHECK(joint[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-6));
}

TEST_CASE("two identical forward-backward passes produce bit-identical gradients") {
  auto run = [] {
    Tensor x = random_tensor({2, 3, 8, 8}, 80, 0.0f, 1.0f, true);
    Tensor w = random_tensor({4, 3, 3, 3}, 81, -0.5f, 0.5f, false);
    Tensor b = random_tensor({4}, 82, -0.1f, 0.1f, false);
    Tape tape;
    Tensor loss = sum_all(tape, relu(tape, conv2d(tape, x, w, b)));
    x.zero_grad();
    tape.backward(loss);
    std::vector<float> out{loss.item()};
    out.insert(out.end(), x.grad_view().begin(), x.grad_view().end());
    tape.reset();
    return out;
  };
  std::vector<float> a = run(), b = run();
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("paused tape records nothing and blocks gradient flow") {
  Tensor x = random_tensor({2, 3}, 90, -1.0f, 1.0f, true);
  Tape tape;
  {
    Tape::Pause pause(tape);
    CHECK_FALSE(tape.recording());
    Tensor y = mul(tape, x, x);
    CHECK(tape.size() == 0);
    (void)y;
  }
  CHECK(tape.recording());
  Tensor z = sum_all(tape, mul_scalar(tape, x, 2.0f));
  x.zero_grad();
  tape.backward(z);
  for (float g : x.grad_view()) CHECK(g == 2.0f);
  tape.reset();
}

TEST_CASE("reset clears recorded ops and the gradients they touched") {
  Tensor x = random_tensor({2, 3}, 91, -1.0f, 1.0f, true);
  Tape tape;
  Tensor loss = sum_all(tape, mul(tape, x, x));
  x.zero_grad();
  tape.backward(loss);
  CHECK(x.has_grad());
  tape.reset();
  CHECK(tape.size() == 0);
  bool any_nonzero = false;
  for (float g : x.grad_view()) any_nonzero = any_nonzero || g != 0.0f;
  CHECK_FALSE(any_nonzero);
}

TEST_CASE("gradients accumulate across graphs until cleared") {
  Tensor x = random_tensor({4}, 92, -1.0f, 1.0f, true);
  Tape t1;
  Tensor l1 = sum_all(t1, x);
  x.zero_grad();
  t1.backward(l1);
  std::vector<float> g1(x.grad_view().begin(), x.grad_view().end());
  Tape t2;
  Tensor l2 = sum_all(t2, mul_scalar(t2, x, 2.0f));
  t2.backward(l2);  // accumulates on top of g1
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(x.grad_view()[i] == doctest::Approx(g1[i] + 2.0f));
  t2.reset();
  t1.reset();
}

TEST_CASE("a second backward on the same graph is rejected") {
  Tensor x = random_tensor({4}, 93, -1.0f, 1.0f, true);
  Tape tape;
  Tensor loss = sum_all(tape, x);
  x.zero_grad();
  tape.backward(loss);
  CHECK_THROWS(tape.backward(loss));
  tape.reset();
  // reset re-arms the tape for a fresh graph
  Tensor loss2 = sum_all(tape, x);
  x.zero_grad();
  tape.backward(loss2);
  for (float g : x.grad_view()) CHECK(g == 1.0f);
  tape.reset();
}
