#include "loadsynth/autodiff.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "loadsynth/errors.hpp"

namespace loadsynth::ad {

namespace {

thread_local bool g_grad_enabled = true;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got shape " + to_string(t.shape()));
}

std::string pair_str(const Shape& a, const Shape& b) { return to_string(a) + " and " + to_string(b); }

// Wider vectors where the CPU has them, chosen at load time. No FMA, so every
// clone rounds identically and results do not depend on the machine.
#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && defined(__ELF__)
#define LOADSYNTH_KERNEL __attribute__((target_clones("avx2", "default")))
#else
#define LOADSYNTH_KERNEL
#endif

// out[j] = exp(in[j] - peak) for arguments <= 0, within a few ulp of std::exp.
// Branch-free so it vectorizes: 2^n * p(r) with r = x - n ln2, |r| <= ln2 / 2,
// and 2^n applied as two halves so subnormal results come out right.
LOADSYNTH_KERNEL void shifted_exp(const double* in, double peak, double* out, std::size_t n) {
  constexpr double log2e = 1.4426950408889634, ln2_hi = 0.693147180369123816490, ln2_lo = 1.90821492927058770002e-10;
  constexpr double shifter = 6755399441055744.0;  // 1.5 * 2^52: adding it rounds to an integer
  for (std::size_t j = 0; j < n; ++j) {
    const double x = std::max(in[j] - peak, -746.0);  // below this the result rounds to 0 anyway
    const double kd = (x * log2e + shifter) - shifter;
    const double r = (x - kd * ln2_hi) - kd * ln2_lo;
    double p = 1.0 / 6227020800.0;
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // (v + shifter) holds 2^51 + v in its low mantissa bits; shifting that
    // into the exponent field gives 2^v without a float-to-int conversion.
    const double k1 = (kd * 0.5 + shifter) - shifter, k2 = kd - k1;
    constexpr std::uint64_t bias = 1023 - (std::uint64_t{1} << 51);
    const double s1 = std::bit_cast<double>((std::bit_cast<std::uint64_t>(k1 + shifter) + bias) << 52);
    const double s2 = std::bit_cast<double>((std::bit_cast<std::uint64_t>(k2 + shifter) + bias) << 52);
    out[j] = p * s1 * s2;
  }
}

// out(m,n) += a(m,k) * b(k,n)
// Narrow outputs (one attention head) keep each output row in registers.
template <std::size_t N>
inline __attribute__((always_inline)) void gemm_nn_narrow(const double* a, const double* b, double* out, std::size_t m, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    double acc[N] = {};
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      for (std::size_t j = 0; j < N; ++j) acc[j] += av * b[p * N + j];
    }
    for (std::size_t j = 0; j < N; ++j) out[i * N + j] += acc[j];
  }
}

LOADSYNTH_KERNEL void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  switch (n) {
    case 1: return gemm_nn_narrow<1>(a, b, out, m, k);
    case 2: return gemm_nn_narrow<2>(a, b, out, m, k);
    case 4: return gemm_nn_narrow<4>(a, b, out, m, k);
    case 8: return gemm_nn_narrow<8>(a, b, out, m, k);
    default: break;
  }
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

// out(m,n) += a(m,k) * b(n,k)^T. b is transposed first so the inner loop runs
// over contiguous output columns, as in gemm_nn.
void gemm_nt(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  thread_local std::vector<double> bt;
  bt.resize(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(a, bt.data(), out, m, k, n);
}

// out(k,n) += a(m,k)^T * b(m,n)
LOADSYNTH_KERNEL void gemm_tn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

template <class F>
Tensor map_values(const Tensor& in, F f) {
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return out;
}

bool is_row_broadcast(const Shape& matrix, const Shape& vec) {
  return matrix.size() == 2 && vec.size() == 1 && matrix[1] == vec[0];
}

}  // namespace

// --- graph plumbing -------------------------------------------------------

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->op = "parameter";
  return Var(std::move(node));
}

Tensor& Var::mutable_value() {
  if (!is_leaf()) throw std::logic_error("mutable_value() on a non-leaf node");
  return node_->value;
}

Var make_op(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  const bool needs = g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                                   [](const Var& v) { return v.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(std::move(in.node_));
  }
  return Var(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor Gradients::of(const Var& v) const {
  auto it = grads_.find(v.node());
  return it != grads_.end() ? it->second : Tensor(v.shape(), 0.0);
}

bool Gradients::reached(const Var& v) const {
  return grads_.contains(v.node());
}

Gradients backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward needs a single-element loss, got shape " + to_string(loss.shape()));
  }
  Gradients out;
  if (!loss.requires_grad()) return out;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<const Node*> order;
  std::unordered_map<const Node*, std::size_t> index;
  std::vector<std::pair<const Node*, std::size_t>> stack{{loss.node(), 0}};
  std::unordered_map<const Node*, bool> visited;
  visited[loss.node()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited[child]) {
        visited[child] = true;
        stack.emplace_back(child, 0);
      }
      continue;
    }
    index[node] = order.size();
    order.push_back(node);
    stack.pop_back();
  }

  std::vector<Tensor> grads(order.size());
  grads.back() = Tensor(loss.shape(), 1.0);
  std::vector<Tensor*> slots;
  for (std::size_t k = order.size(); k-- > 0;) {
    const Node* node = order[k];
    if (!node->backward || grads[k].size() == 0) continue;
    slots.assign(node->inputs.size(), nullptr);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const Node* in = node->inputs[i].get();
      if (!in->requires_grad) continue;
      Tensor& g = grads[index.at(in)];
      if (g.size() == 0) g = Tensor(in->value.shape(), 0.0);
      slots[i] = &g;
    }
    node->backward(*node, grads[k], slots);
  }

  // Interior nodes are dropped; only leaves are ever queried.
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!order[i]->inputs.empty()) continue;
    if (grads[i].size() == 0) grads[i] = Tensor(order[i]->value.shape(), 0.0);
    out.grads_.emplace(order[i], std::move(grads[i]));
  }
  return out;
}

// --- operations -----------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  if (av.cols() != bv.rows()) throw ShapeError("matmul: inner dimensions differ for " + pair_str(av.shape(), bv.shape()));
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return make_op("matmul", std::move(out), {a, b}, [m, k, n](const Node& self, const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& A = self.inputs[0]->value;
    const Tensor& B = self.inputs[1]->value;
    if (gi[0]) gemm_nt(g.data().data(), B.data().data(), gi[0]->data().data(), m, n, k);
    if (gi[1]) gemm_tn(A.data().data(), g.data().data(), gi[1]->data().data(), m, k, n);
  });
}

Var matmul_transposed(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul_transposed");
  require_matrix(bv, "matmul_transposed");
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_transposed: inner dimensions differ for " + pair_str(av.shape(), bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor out({m, n});
  gemm_nt(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
  return make_op("matmul_transposed", std::move(out), {a, b},
                 [m, k, n](const Node& self, const Tensor& g, std::span<Tensor* const> gi) {
                   const Tensor& A = self.inputs[0]->value;
                   const Tensor& B = self.inputs[1]->value;
                   // dA = g B, dB = g^T A
                   if (gi[0]) gemm_nn(g.data().data(), B.data().data(), gi[0]->data().data(), m, n, k);
                   if (gi[1]) gemm_tn(g.data().data(), A.data().data(), gi[1]->data().data(), m, n, k);
                 });
}

Var transpose(const Var& a) {
  const Tensor& av = a.value();
  require_matrix(av, "transpose");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return make_op("transpose", std::move(out), {a}, [r, c](const Node&, const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gi[0]->at(i, j) += g.at(j, i);
  });
}

Var add(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() == bv.shape()) {
    Tensor out = av;
    out += bv;
    return make_op("add", std::move(out), {a, b}, [](const Node&, const Tensor& g, std::span<Tensor* const> gi) {
      if (gi[0]) *gi[0] += g;
      if (gi[1]) *gi[1] += g;
    });
  }
  const bool b_is_vec = is_row_broadcast(av.shape(), bv.shape());
  if (!b_is_vec && !is_row_broadcast(bv.shape(), av.shape())) {
    throw ShapeError("add: cannot combine shapes " + pair_str(av.shape(), bv.shape()));
  }
  const Tensor& mat = b_is_vec ? av : bv;
  const Tensor& vec = b_is_vec ? bv : av;
  const std::size_t rows = mat.rows(), cols = mat.cols();
  Tensor out = mat;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out.at(i, j) += vec[j];
  const std::size_t mat_slot = b_is_vec ? 0 : 1;
  return make_op("add_broadcast", std::move(out), {a, b},
                 [rows, cols, mat_slot](const Node&, const Tensor& g, std::span<Tensor* const> gi) {
                   if (gi[mat_slot]) *gi[mat_slot] += g;
                   if (Tensor* gv = gi[1 - mat_slot]) {
                     for (std::size_t i = 0; i < rows; ++i)
                       for (std::size_t j = 0; j < cols; ++j) (*gv)[j] += g.at(i, j);
                   }
                 });
}

Var sub(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) throw ShapeError("sub: shapes differ: " + pair_str(av.shape(), bv.shape()));
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_op("sub", std::move(out), {a, b}, [](const Node&, const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0]) *gi[0] += g;
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
  });
}

Var mul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) throw ShapeError("mul: shapes differ: " + pair_str(av.shape(), bv.shape()));
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op("mul", std::move(out), {a, b}, [](const Node& self, const Tensor& g, std::span<Tensor* const> gi) {
    const Tensor& A = self.inputs[0]->value;
    const Tensor& B = self.inputs[1]->value;
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * B[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * A[i];
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = map_values(a.value(), [factor](double x) { return x * factor; });
  return make_op("scale", std::move(out), {a}, [factor](const Node&, const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += factor * g[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out = map_values(a.value(), [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return make_op("sigmoid", std::move(out), {a}, [](const Node& self, const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.value[i];
      (*gi[0])[i] += g[i] * s * (1.0 - s);
    }
  });
}

Var tanh(const Var& a) {
  Tensor out = map_values(a.value(), [](double x) { return std::tanh(x); });
  return make_op("tanh", std::move(out), {a}, [](const Node& self, const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value[i];
      (*gi[0])[i] += g[i] * (1.0 - y * y);
    }
  });
}

Var softmax(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  if (cols == 0) throw std::domain_error("softmax over an empty axis");
  const std::size_t rows = av.size() / cols;
  Tensor out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = av.data().data() + r * cols;
    double* o = out.data().data() + r * cols;
    const double peak = *std::max_element(in, in + cols);
    shifted_exp(in, peak, o, cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += o[j];
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < cols; ++j) o[j] *= inv;
  }
  return make_op("softmax", std::move(out), {a}, [rows, cols](const Node& self, const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data().data() + r * cols;
      const double* gr = g.data().data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
      double* d = gi[0]->data().data() + r * cols;
      for (std::size_t j = 0; j < cols; ++j) d[j] += y[j] * (gr[j] - dot);
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " + to_string(first));
  // Treat every input as (outer, extent_along_axis * inner).
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw ShapeError("concat: incompatible shapes " + pair_str(first, s) + " along axis " + std::to_string(axis));
    out_shape[axis] += s[axis];
    widths.push_back(s[axis] * inner);
  }
  const std::size_t total = out_shape[axis] * inner;
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].value().data().data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src + o * widths[k], widths[k], out.data().data() + o * total + offset);
    offset += widths[k];
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return make_op("concat", std::move(out), std::move(inputs),
                 [outer, total, widths](const Node&, const Tensor& g, std::span<Tensor* const> gi) {
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < widths.size(); ++k) {
                     if (Tensor* d = gi[k]) {
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t j = 0; j < widths[k]; ++j) (*d)[o * widths[k] + j] += g[o * total + off + j];
                     }
                     off += widths[k];
                   }
                 });
}

std::vector<Var> split(const Var& a, std::size_t chunks, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size()) throw ShapeError("split: axis " + std::to_string(axis) + " out of range for " + to_string(s));
  if (chunks == 0 || s[axis] % chunks != 0) {
    throw ShapeError("split: extent " + std::to_string(s[axis]) + " of shape " + to_string(s) +
                     " is not divisible into " + std::to_string(chunks) + " equal chunks");
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t piece = s[axis] / chunks;
  const std::size_t width = piece * inner;
  const std::size_t total = s[axis] * inner;
  Shape piece_shape = s;
  piece_shape[axis] = piece;
  std::vector<Var> result;
  result.reserve(chunks);
  for (std::size_t k = 0; k < chunks; ++k) {
    Tensor out(piece_shape);
    const double* src = a.value().data().data();
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(src + o * total + k * width, width, out.data().data() + o * width);
    result.push_back(make_op("split", std::move(out), {a},
                             [outer, width, total, k](const Node&, const Tensor& g, std::span<Tensor* const> gi) {
                               for (std::size_t o = 0; o < outer; ++o)
                                 for (std::size_t j = 0; j < width; ++j) (*gi[0])[o * total + k * width + j] += g[o * width + j];
                             }));
  }
  return result;
}

Var reshape(const Var& a, Shape shape) {
  if (element_count(shape) != a.value().size()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  Tensor out(std::move(shape), a.value().storage());
  return make_op("reshape", std::move(out), {a}, [](const Node&, const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return make_op("sum", Tensor::scalar(total), {a}, [](const Node&, const Tensor& g, std::span<Tensor* const> gi) {
    const double gv = g[0];
    for (auto& d : gi[0]->data()) d += gv;
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_squared_error(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) throw ShapeError("sum_squared_error: shapes differ: " + pair_str(av.shape(), bv.shape()));
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    total += d * d;
  }
  return make_op("sum_squared_error", Tensor::scalar(total), {a, b},
                 [](const Node& self, const Tensor& g, std::span<Tensor* const> gi) {
                   const Tensor& A = self.inputs[0]->value;
                   const Tensor& B = self.inputs[1]->value;
                   for (std::size_t i = 0; i < A.size(); ++i) {
                     const double d = 2.0 * g[0] * (A[i] - B[i]);
                     if (gi[0]) (*gi[0])[i] += d;
                     if (gi[1]) (*gi[1])[i] -= d;
                   }
                 });
}

Var lstm(const Var& gate_inputs, const Var& w_hidden) {
  const Tensor& pre = gate_inputs.value();
  const Tensor& wh = w_hidden.value();
  require_matrix(pre, "lstm");
  require_matrix(wh, "lstm");
  const std::size_t steps = pre.rows(), w = wh.rows();
  if (wh.cols() != 4 * w || pre.cols() != 4 * w) {
    throw ShapeError("lstm: expected gate inputs (L, 4w) and hidden weights (w, 4w), got " +
                     pair_str(pre.shape(), wh.shape()));
  }
  // Per step: activated gates (i, f, g, o) and the cell state.
  auto gates = std::make_shared<std::vector<double>>(steps * 4 * w);
  auto cells = std::make_shared<std::vector<double>>(steps * w);
  Tensor h({steps, w});
  std::vector<double> a(4 * w);
  for (std::size_t s = 0; s < steps; ++s) {
    std::fill(a.begin(), a.end(), 0.0);
    if (s > 0) gemm_nn(h.data().data() + (s - 1) * w, wh.data().data(), a.data(), 1, w, 4 * w);
    double* gs = gates->data() + s * 4 * w;
    for (std::size_t j = 0; j < 4 * w; ++j) {
      const double z = pre[s * 4 * w + j] + a[j];
      gs[j] = (j >= 2 * w && j < 3 * w) ? std::tanh(z) : 1.0 / (1.0 + std::exp(-z));
    }
    for (std::size_t j = 0; j < w; ++j) {
      const double c_prev = s > 0 ? (*cells)[(s - 1) * w + j] : 0.0;
      const double c = gs[w + j] * c_prev + gs[j] * gs[2 * w + j];
      (*cells)[s * w + j] = c;
      h[s * w + j] = gs[3 * w + j] * std::tanh(c);
    }
  }
  return make_op("lstm", std::move(h), {gate_inputs, w_hidden},
                 [steps, w, gates, cells](const Node& self, const Tensor& g, std::span<Tensor* const> gi) {
                   const Tensor& H = self.value;
                   const Tensor& W = self.inputs[1]->value;
                   std::vector<double> dh_next(w, 0.0), dc_next(w, 0.0), da(4 * w);
                   for (std::size_t s = steps; s-- > 0;) {
                     const double* gs = gates->data() + s * 4 * w;
                     for (std::size_t j = 0; j < w; ++j) {
                       const double i = gs[j], f = gs[w + j], cand = gs[2 * w + j], o = gs[3 * w + j];
                       const double c = (*cells)[s * w + j];
                       const double c_prev = s > 0 ? (*cells)[(s - 1) * w + j] : 0.0;
                       const double tc = std::tanh(c);
                       const double dh = g[s * w + j] + dh_next[j];
                       const double dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                       da[j] = dc * cand * i * (1.0 - i);
                       da[w + j] = dc * c_prev * f * (1.0 - f);
                       da[2 * w + j] = dc * i * (1.0 - cand * cand);
                       da[3 * w + j] = dh * tc * o * (1.0 - o);
                       dc_next[j] = dc * f;
                     }
                     if (gi[0]) {
                       double* row = gi[0]->data().data() + s * 4 * w;
                       for (std::size_t j = 0; j < 4 * w; ++j) row[j] += da[j];
                     }
                     std::fill(dh_next.begin(), dh_next.end(), 0.0);
                     if (s > 0) {
                       // The step-s preactivation saw h_{s-1} through W.
                       if (gi[1]) gemm_tn(H.data().data() + (s - 1) * w, da.data(), gi[1]->data().data(), 1, w, 4 * w);
                       gemm_nt(da.data(), W.data().data(), dh_next.data(), 1, 4 * w, w);
                     }
                   }
                 });
}

// --- parameters -----------------------------------------------------------

Var ParameterSet::add(std::string name, Tensor initial) {
  if (contains(name)) throw std::logic_error("duplicate parameter name: " + name);
  Var v = Var::parameter(std::move(initial));
  params_.push_back({std::move(name), v});
  return v;
}

const Var& ParameterSet::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.var;
  throw std::out_of_range("unknown parameter: " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const NamedParameter& p) { return p.name == name; });
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

std::vector<Var> ParameterSet::vars() const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var);
  return out;
}

std::vector<Tensor> ParameterSet::gradients(const Gradients& grads) const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(grads.of(p.var));
  return out;
}

}  // namespace loadsynth::ad
