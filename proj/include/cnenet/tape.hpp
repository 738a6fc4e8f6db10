#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cnenet/ndarray.hpp"
#include "cnenet/rng.hpp"

namespace cne {

// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const noexcept { return id != kInvalid; }
};

class Tape;
using BackwardFn = std::function<void(Tape&, std::size_t self)>;

// Records a forward computation for one reverse sweep. A tape is built per
// forward pass and is not shared between threads.
class Tape {
 public:
  Tape() { nodes_.reserve(256); }

  Var constant(NdArray value);

  // Leaf bound to an external parameter. The tape reads the parameter in
  // place; backward() adds the leaf's gradient into param's gradient slot.
  // The parameter must outlive the tape.
  Var parameter(const NdArray& param);

  Var push(NdArray value, BackwardFn backward);

  const NdArray& value(Var v) const;
  std::span<const double> grad(Var v) const;

  // Gradient buffer for use inside backward closures.
  std::span<double> grad_mut(std::size_t id);

  // Seeds d(loss)/d(loss) = seed for a single-element loss and sweeps in reverse.
  void backward(Var loss, double seed = 1.0);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    NdArray owned;
    const NdArray* param = nullptr;
    std::vector<double> grad;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- forward kernels on plain arrays -------------------------------------

// Standard matrix product; rank-1 operands are treated as a single row.
NdArray matmul(const NdArray& a, const NdArray& b);

// Row-wise softmax with max subtraction. A non-empty key_mask marks the
// columns allowed to receive weight; masked columns get exactly zero.
NdArray softmax(const NdArray& x, std::span<const std::uint8_t> key_mask = {});

inline constexpr double kLogFloor = 1e-12;

// -log(max(p[t], floor)) where y is one-hot at t.
double cross_entropy(const NdArray& probs, const NdArray& y_onehot, double floor = kLogFloor);

// ---- differentiable ops --------------------------------------------------

Var matmul(Tape& t, Var a, Var b);
// a * b^T
Var matmul_bt(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
// Adds a bias vector to every row.
Var add_bias(Tape& t, Var a, Var bias);
Var scale(Tape& t, Var a, double c);
Var gelu(Tape& t, Var a);
Var softmax_rows(Tape& t, Var a, std::span<const std::uint8_t> key_mask = {});
Var layer_norm(Tape& t, Var a, Var gain, Var bias, double eps = 1e-12);
// Inverted dropout; identity when rate == 0.
Var dropout(Tape& t, Var a, double rate, Rng& rng);
Var gather_rows(Tape& t, Var table, std::span<const std::size_t> rows);
Var slice_rows(Tape& t, Var a, std::size_t begin, std::size_t count);
Var slice_cols(Tape& t, Var a, std::size_t begin, std::size_t width);
Var concat_cols(Tape& t, std::span<const Var> parts);
// Scalar -log(max(p[target], floor)) for a single probability row.
Var cross_entropy(Tape& t, Var probs, std::size_t target, double floor = kLogFloor);
Var sum(Tape& t, std::span<const Var> scalars);
Var sum_squares(Tape& t, Var a);

// ---- finite-difference verification --------------------------------------

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries = 0;
};

using LossBuilder = std::function<Var(Tape&)>;

// Compares reverse-mode gradients of a scalar loss against central
// differences for every entry of every parameter. The builder must bind the
// parameters through Tape::parameter and be deterministic.
GradCheckResult grad_check(const LossBuilder& loss, std::span<NdArray* const> params,
                           double eps = 1e-4);

}  // namespace cne
