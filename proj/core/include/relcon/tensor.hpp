#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace relcon {

class Tape;

// Dense row-major tensor of 64-bit floats. Copies are cheap handles onto
// shared storage. Values are treated as immutable once an op has consumed
// them; the optimizer is the only sanctioned mutator.
class Tensor {
 public:
  struct Storage {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until first accumulation
    Tape* tape = nullptr;      // non-null while recorded on a live tape
  };

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);
  explicit Tensor(double scalar);  // shape {1}

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor from_storage(std::shared_ptr<Storage> s);

  bool defined() const { return static_cast<bool>(s_); }
  const std::vector<std::size_t>& shape() const;
  std::size_t ndim() const;
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();  // init / optimizer use only
  double value() const;                   // scalar convenience
  double at(std::size_t flat_index) const;

  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  // Internal: shared storage handle used by ops and the tape.
  const std::shared_ptr<Storage>& storage() const { return s_; }

 private:
  std::shared_ptr<Storage> s_;
};

// Reverse-mode tape. Ops append nodes in execution order, which is a valid
// topological order by construction; backward walks the list once in
// reverse. Each training step should use a fresh tape; destroying the tape
// detaches every tensor it touched, so parameters can be reused (or frozen)
// afterwards.
class Tape {
 public:
  Tape() = default;
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a tensor as a gradient leaf recorded through this tape.
  // Allocates its gradient buffer so grad() is defined after backward.
  Tensor watch(Tensor t);

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  // requires_grad ancestor. loss must be scalar; a tape runs backward once.
  void backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

  // Internal: used by ops to append a backward closure and claim an output.
  void record(std::function<void()> backward_fn,
              const std::shared_ptr<Tensor::Storage>& out);

 private:
  std::vector<std::function<void()>> nodes_;
  std::vector<std::shared_ptr<Tensor::Storage>> touched_;
  bool used_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable ops. Binary ops broadcast right-aligned (each trailing dim
// must match or be 1). Ops record onto the unique live tape among their
// inputs; tensors from two different tapes cannot mix.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);  // [M,K]x[K,N] -> [M,N]
Tensor transpose(const Tensor& a);                // 2-D

// Dilated 1-D cross-correlation along time. input [T,Cin], kernel
// [k,Cin,Cout], k odd, zero "same" padding; stride subsamples output
// positions t' -> input center t'*stride (stride 1 keeps length T).
Tensor conv1d(const Tensor& input, const Tensor& kernel, int dilation,
              int stride = 1);

// Euclidean projection of logits onto the probability simplex.
Tensor sparsemax(const Tensor& logits);        // 1-D
Tensor sparsemax_rows(const Tensor& logits);   // 2-D, row-wise

Tensor softmax(const Tensor& logits, double temperature);       // 1-D
Tensor softmax_rows(const Tensor& logits, double temperature);  // 2-D

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);  // non-finite result -> error

Tensor add(const Tensor& a, double c);
Tensor mul(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);  // negative input -> error
Tensor log(const Tensor& a);   // non-positive input -> error
Tensor exp(const Tensor& a);   // overflow -> error
Tensor clamp_min(const Tensor& a, double floor);

Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
Tensor sum_all(const Tensor& a);   // scalar
Tensor mean_all(const Tensor& a);  // scalar

Tensor l2_norm(const Tensor& a);  // scalar sqrt(sum of squares)

// Packs scalar tensors into one vector of length n (gradient scatters back).
Tensor stack_scalars(const std::vector<Tensor>& scalars);

// Same data, new shape (sizes must agree); gradient passes through.
Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape);

// ---------------------------------------------------------------------------
// Adam optimizer (beta1=0.9, beta2=0.999, eps=1e-8, bias correction).
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig config = {});

  // Applies one update using the gradients currently stored on the params.
  // Missing gradients count as zero; non-finite gradients are an error.
  void step();
  void zero_grad();

  std::int64_t steps_taken() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace relcon
