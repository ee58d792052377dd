#include "weatherformer/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

namespace wf::ad {
namespace {

template <typename T>
Tape<T>& common_tape(Var<T> a, Var<T> b, const char* op) {
  if (&a.tape() != &b.tape()) throw TapeError(std::string(op) + ": operands on different tapes");
  return a.tape();
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeError(std::string(op) + ": " + detail);
}

// C(m x n) += A(m x k) * B(k x n)
template <typename T>
void gemm_nn(const T* A, const T* B, T* C, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T a = A[i * k + p];
      if (a == T{0}) continue;
      const T* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
    }
  }
}

// C(m x n) += A(m x k) * B(n x k)^T
template <typename T>
void gemm_nt(const T* A, const T* B, T* C, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* a = A + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* b = B + j * k;
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[p] * b[p];
      C[i * n + j] += acc;
    }
  }
}

// C(m x n) += A(k x m)^T * B(k x n)
template <typename T>
void gemm_tn(const T* A, const T* B, T* C, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* a = A + p * m;
    const T* b = B + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T ai = a[i];
      if (ai == T{0}) continue;
      T* c = C + i * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += ai * b[j];
    }
  }
}

template <typename T, typename F, typename D>
Var<T> unary(Var<T> a, F f, D dfdx, const char* name) {
  const auto& A = a.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = f(A[i]);
  return a.tape().record(
      std::move(out), {a},
      [ia = a.id(), dfdx](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ia)) return;
        const auto& G = t.grad(self);
        const auto& X = t.value(ia);
        const auto& Y = t.value(self);
        auto& GA = t.grad(ia);
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * dfdx(X[i], Y[i]);
      },
      name);
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  auto& tape = common_tape(a, b, "add");
  require(a.shape() == b.shape(), "add", a.shape().str() + " vs " + b.shape().str());
  const auto& A = a.value();
  const auto& B = b.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] + B[i];
  return tape.record(
      std::move(out), {a, b},
      [ia = a.id(), ib = b.id()](Tape<T>& t, std::uint32_t self) {
        const auto& G = t.grad(self);
        for (auto id : {ia, ib}) {
          if (!t.requires_grad(id)) continue;
          auto& GX = t.grad(id);
          for (std::size_t i = 0; i < G.size(); ++i) GX[i] += G[i];
        }
      },
      "add");
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  auto& tape = common_tape(a, b, "sub");
  require(a.shape() == b.shape(), "sub", a.shape().str() + " vs " + b.shape().str());
  const auto& A = a.value();
  const auto& B = b.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] - B[i];
  return tape.record(
      std::move(out), {a, b},
      [ia = a.id(), ib = b.id()](Tape<T>& t, std::uint32_t self) {
        const auto& G = t.grad(self);
        if (t.requires_grad(ia)) {
          auto& GA = t.grad(ia);
          for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
        }
        if (t.requires_grad(ib)) {
          auto& GB = t.grad(ib);
          for (std::size_t i = 0; i < G.size(); ++i) GB[i] -= G[i];
        }
      },
      "sub");
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  auto& tape = common_tape(a, b, "mul");
  require(a.shape() == b.shape(), "mul", a.shape().str() + " vs " + b.shape().str());
  const auto& A = a.value();
  const auto& B = b.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  return tape.record(
      std::move(out), {a, b},
      [ia = a.id(), ib = b.id()](Tape<T>& t, std::uint32_t self) {
        const auto& G = t.grad(self);
        const auto& A = t.value(ia);
        const auto& B = t.value(ib);
        if (t.requires_grad(ia)) {
          auto& GA = t.grad(ia);
          for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * B[i];
        }
        if (t.requires_grad(ib)) {
          auto& GB = t.grad(ib);
          for (std::size_t i = 0; i < G.size(); ++i) GB[i] += G[i] * A[i];
        }
      },
      "mul");
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  const auto& A = a.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * factor;
  return a.tape().record(
      std::move(out), {a},
      [ia = a.id(), factor](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ia)) return;
        const auto& G = t.grad(self);
        auto& GA = t.grad(ia);
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i] * factor;
      },
      "scale");
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> row) {
  auto& tape = common_tape(a, row, "add_row");
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row",
          a.shape().str() + " + " + row.shape().str());
  const auto& A = a.value();
  const auto& R = row.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) = A(r, c) + R[c];
  return tape.record(
      std::move(out), {a, row},
      [ia = a.id(), ir = row.id()](Tape<T>& t, std::uint32_t self) {
        const auto& G = t.grad(self);
        if (t.requires_grad(ia)) {
          auto& GA = t.grad(ia);
          for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
        }
        if (t.requires_grad(ir)) {
          auto& GR = t.grad(ir);
          for (std::size_t r = 0; r < G.rows(); ++r)
            for (std::size_t c = 0; c < G.cols(); ++c) GR[c] += G(r, c);
        }
      },
      "add_row");
}

template <typename T>
Var<T> mul_row(Var<T> a, Var<T> row) {
  auto& tape = common_tape(a, row, "mul_row");
  require(row.rows() == 1 && row.cols() == a.cols(), "mul_row",
          a.shape().str() + " * " + row.shape().str());
  const auto& A = a.value();
  const auto& R = row.value();
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) = A(r, c) * R[c];
  return tape.record(
      std::move(out), {a, row},
      [ia = a.id(), ir = row.id()](Tape<T>& t, std::uint32_t self) {
        const auto& G = t.grad(self);
        const auto& A = t.value(ia);
        const auto& R = t.value(ir);
        if (t.requires_grad(ia)) {
          auto& GA = t.grad(ia);
          for (std::size_t r = 0; r < G.rows(); ++r)
            for (std::size_t c = 0; c < G.cols(); ++c) GA(r, c) += G(r, c) * R[c];
        }
        if (t.requires_grad(ir)) {
          auto& GR = t.grad(ir);
          for (std::size_t r = 0; r < G.rows(); ++r)
            for (std::size_t c = 0; c < G.cols(); ++c) GR[c] += G(r, c) * A(r, c);
        }
      },
      "mul_row");
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  auto& tape = common_tape(a, b, "matmul");
  require(a.cols() == b.rows(), "matmul", a.shape().str() + " x " + b.shape().str());
  const auto& A = a.value();
  const auto& B = b.value();
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor<T> out(m, n);
  gemm_nn(A.data(), B.data(), out.data(), m, k, n);
  return tape.record(
      std::move(out), {a, b},
      [ia = a.id(), ib = b.id(), m, k, n](Tape<T>& t, std::uint32_t self) {
        const auto& G = t.grad(self);
        if (t.requires_grad(ia)) gemm_nt(G.data(), t.value(ib).data(), t.grad(ia).data(), m, n, k);
        if (t.requires_grad(ib)) gemm_tn(t.value(ia).data(), G.data(), t.grad(ib).data(), k, m, n);
      },
      "matmul");
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  auto& tape = common_tape(a, b, "matmul_nt");
  require(a.cols() == b.cols(), "matmul_nt", a.shape().str() + " x " + b.shape().str() + "^T");
  const auto& A = a.value();
  const auto& B = b.value();
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Tensor<T> out(m, n);
  gemm_nt(A.data(), B.data(), out.data(), m, k, n);
  return tape.record(
      std::move(out), {a, b},
      [ia = a.id(), ib = b.id(), m, k, n](Tape<T>& t, std::uint32_t self) {
        const auto& G = t.grad(self);
        // dA = G * B, dB = G^T * A
        if (t.requires_grad(ia)) gemm_nn(G.data(), t.value(ib).data(), t.grad(ia).data(), m, n, k);
        if (t.requires_grad(ib)) gemm_tn(G.data(), t.value(ia).data(), t.grad(ib).data(), n, m, k);
      },
      "matmul_nt");
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const auto& A = a.value();
  Tensor<T> out(A.cols(), A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) out(c, r) = A(r, c);
  return a.tape().record(
      std::move(out), {a},
      [ia = a.id()](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ia)) return;
        const auto& G = t.grad(self);
        auto& GA = t.grad(ia);
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) GA(c, r) += G(r, c);
      },
      "transpose");
}

template <typename T>
Var<T> relu(Var<T> a) {
  return unary(
      a, [](T x) { return x > T{0} ? x : T{0}; },
      [](T x, T) { return x > T{0} ? T{1} : T{0}; }, "relu");
}

template <typename T>
Var<T> gelu(Var<T> a) {
  constexpr T kInvSqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T kInvSqrt2Pi = std::numbers::inv_sqrtpi_v<T> * kInvSqrt2;
  return unary(
      a, [](T x) { return T(0.5) * x * (T{1} + std::erf(x * kInvSqrt2)); },
      [](T x, T) {
        return T(0.5) * (T{1} + std::erf(x * kInvSqrt2)) +
               x * kInvSqrt2Pi * std::exp(T(-0.5) * x * x);
      },
      "gelu");
}

template <typename T>
Var<T> tanh(Var<T> a) {
  return unary(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; }, "tanh");
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  return unary(
      a,
      [](T x) {
        if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
        const T e = std::exp(x);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); }, "sigmoid");
}

template <typename T>
Var<T> softmax_rows(Var<T> a, std::span<const bool> key_mask) {
  const auto& A = a.value();
  const bool masked = !key_mask.empty();
  require(!masked || key_mask.size() == A.cols(), "softmax_rows",
          "mask length " + std::to_string(key_mask.size()) + " vs " + A.shape().str());
  if (masked && std::none_of(key_mask.begin(), key_mask.end(), [](bool b) { return b; })) {
    throw ShapeError("softmax_rows: every key is masked");
  }
  Tensor<T> out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < A.cols(); ++c)
      if (!masked || key_mask[c]) mx = std::max(mx, A(r, c));
    T total{0};
    for (std::size_t c = 0; c < A.cols(); ++c) {
      const T e = (!masked || key_mask[c]) ? std::exp(A(r, c) - mx) : T{0};
      out(r, c) = e;
      total += e;
    }
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) /= total;
  }
  return a.tape().record(
      std::move(out), {a},
      [ia = a.id()](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ia)) return;
        const auto& G = t.grad(self);
        const auto& Y = t.value(self);
        auto& GA = t.grad(ia);
        for (std::size_t r = 0; r < G.rows(); ++r) {
          T dot{0};
          for (std::size_t c = 0; c < G.cols(); ++c) dot += G(r, c) * Y(r, c);
          for (std::size_t c = 0; c < G.cols(); ++c) GA(r, c) += Y(r, c) * (G(r, c) - dot);
        }
      },
      "softmax_rows");
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  auto& tape = common_tape(x, gamma, "layer_norm");
  common_tape(x, beta, "layer_norm");
  const auto& X = x.value();
  const std::size_t n = X.cols();
  require(gamma.rows() == 1 && gamma.cols() == n && beta.shape() == gamma.shape(), "layer_norm",
          "affine shape " + gamma.shape().str() + " for input " + X.shape().str());
  const auto& Gm = gamma.value();
  const auto& Bt = beta.value();
  Tensor<T> out(X.rows(), n);
  // Normalised activations and inverse std are kept for the backward rule.
  auto xhat = std::make_shared<Tensor<T>>(X.rows(), n);
  auto inv_std = std::make_shared<std::vector<T>>(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    T mean{0};
    for (std::size_t c = 0; c < n; ++c) mean += X(r, c);
    mean /= static_cast<T>(n);
    T var{0};
    for (std::size_t c = 0; c < n; ++c) var += (X(r, c) - mean) * (X(r, c) - mean);
    var /= static_cast<T>(n);
    const T is = T{1} / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      const T h = (X(r, c) - mean) * is;
      (*xhat)(r, c) = h;
      out(r, c) = h * Gm[c] + Bt[c];
    }
  }
  return tape.record(
      std::move(out), {x, gamma, beta},
      [ix = x.id(), ig = gamma.id(), ib = beta.id(), xhat, inv_std](Tape<T>& t,
                                                                    std::uint32_t self) {
        const auto& G = t.grad(self);
        const auto& Gm = t.value(ig);
        const std::size_t n = G.cols();
        if (t.requires_grad(ig) || t.requires_grad(ib)) {
          for (std::size_t r = 0; r < G.rows(); ++r) {
            for (std::size_t c = 0; c < n; ++c) {
              if (t.requires_grad(ig)) t.grad(ig)[c] += G(r, c) * (*xhat)(r, c);
              if (t.requires_grad(ib)) t.grad(ib)[c] += G(r, c);
            }
          }
        }
        if (!t.requires_grad(ix)) return;
        auto& GX = t.grad(ix);
        for (std::size_t r = 0; r < G.rows(); ++r) {
          T sum_g{0}, sum_gx{0};
          for (std::size_t c = 0; c < n; ++c) {
            const T gh = G(r, c) * Gm[c];
            sum_g += gh;
            sum_gx += gh * (*xhat)(r, c);
          }
          const T inv_n = T{1} / static_cast<T>(n);
          for (std::size_t c = 0; c < n; ++c) {
            const T gh = G(r, c) * Gm[c];
            GX(r, c) += (*inv_std)[r] * (gh - inv_n * sum_g - (*xhat)(r, c) * inv_n * sum_gx);
          }
        }
      },
      "layer_norm");
}

template <typename T>
Var<T> embedding(Var<T> table, std::span<const std::size_t> indices) {
  const auto& W = table.value();
  require(!indices.empty(), "embedding", "no indices");
  for (auto i : indices) {
    require(i < W.rows(), "embedding", "index " + std::to_string(i) + " outside " + W.shape().str());
  }
  Tensor<T> out(indices.size(), W.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy(W.row(indices[r]).begin(), W.row(indices[r]).end(), out.row(r).begin());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return table.tape().record(
      std::move(out), {table},
      [it = table.id(), idx = std::move(idx)](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(it)) return;
        const auto& G = t.grad(self);
        auto& GW = t.grad(it);
        for (std::size_t r = 0; r < idx.size(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) GW(idx[r], c) += G(r, c);
      },
      "embedding");
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols", "row mismatch " + p.shape().str());
    cols += p.cols();
  }
  Tensor<T> out(rows, cols);
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& P = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(P.row(r).begin(), P.row(r).end(), out.row(r).begin() + off);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += P.cols();
  }
  return parts.front().tape().record(
      std::move(out), parts,
      [ids = std::move(ids), offsets = std::move(offsets)](Tape<T>& t, std::uint32_t self) {
        const auto& G = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          auto& GP = t.grad(ids[k]);
          for (std::size_t r = 0; r < GP.rows(); ++r)
            for (std::size_t c = 0; c < GP.cols(); ++c) GP(r, c) += G(r, offsets[k] + c);
        }
      },
      "concat_cols");
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows", "column mismatch " + p.shape().str());
    rows += p.rows();
  }
  Tensor<T> out(rows, cols);
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& P = p.value();
    std::copy(P.values().begin(), P.values().end(), out.values().begin() + off * cols);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += P.rows();
  }
  return parts.front().tape().record(
      std::move(out), parts,
      [ids = std::move(ids), offsets = std::move(offsets)](Tape<T>& t, std::uint32_t self) {
        const auto& G = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          auto& GP = t.grad(ids[k]);
          const T* src = G.data() + offsets[k] * G.cols();
          for (std::size_t i = 0; i < GP.size(); ++i) GP[i] += src[i];
        }
      },
      "concat_rows");
}

template <typename T>
Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end) {
  const auto& A = a.value();
  require(begin < end && end <= A.rows(), "slice_rows",
          "range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + A.shape().str());
  Tensor<T> out(end - begin, A.cols());
  std::copy(A.data() + begin * A.cols(), A.data() + end * A.cols(), out.data());
  return a.tape().record(
      std::move(out), {a},
      [ia = a.id(), begin](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ia)) return;
        const auto& G = t.grad(self);
        auto& GA = t.grad(ia);
        T* dst = GA.data() + begin * GA.cols();
        for (std::size_t i = 0; i < G.size(); ++i) dst[i] += G[i];
      },
      "slice_rows");
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end) {
  const auto& A = a.value();
  require(begin < end && end <= A.cols(), "slice_cols",
          "range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + A.shape().str());
  Tensor<T> out(A.rows(), end - begin);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = A(r, c);
  return a.tape().record(
      std::move(out), {a},
      [ia = a.id(), begin](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ia)) return;
        const auto& G = t.grad(self);
        auto& GA = t.grad(ia);
        for (std::size_t r = 0; r < G.rows(); ++r)
          for (std::size_t c = 0; c < G.cols(); ++c) GA(r, begin + c) += G(r, c);
      },
      "slice_cols");
}

template <typename T>
Var<T> reshape(Var<T> a, std::size_t rows, std::size_t cols) {
  const auto& A = a.value();
  require(rows * cols == A.size(), "reshape",
          A.shape().str() + " to " + Shape{rows, cols}.str());
  Tensor<T> out(rows, cols, std::vector<T>(A.values().begin(), A.values().end()));
  return a.tape().record(
      std::move(out), {a},
      [ia = a.id()](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ia)) return;
        const auto& G = t.grad(self);
        auto& GA = t.grad(ia);
        for (std::size_t i = 0; i < G.size(); ++i) GA[i] += G[i];
      },
      "reshape");
}

template <typename T>
Var<T> mean_rows(Var<T> a) {
  const auto& A = a.value();
  Tensor<T> out(1, A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) out[c] += A(r, c);
  const T inv = T{1} / static_cast<T>(A.rows());
  for (std::size_t c = 0; c < A.cols(); ++c) out[c] *= inv;
  return a.tape().record(
      std::move(out), {a},
      [ia = a.id(), inv](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ia)) return;
        const auto& G = t.grad(self);
        auto& GA = t.grad(ia);
        for (std::size_t r = 0; r < GA.rows(); ++r)
          for (std::size_t c = 0; c < GA.cols(); ++c) GA(r, c) += G[c] * inv;
      },
      "mean_rows");
}

template <typename T>
Var<T> sum(Var<T> a) {
  const auto& A = a.value();
  T total{0};
  for (const T v : A.values()) total += v;
  return a.tape().record(
      Tensor<T>::scalar(total), {a},
      [ia = a.id()](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ia)) return;
        const T g = t.grad(self)[0];
        auto& GA = t.grad(ia);
        for (std::size_t i = 0; i < GA.size(); ++i) GA[i] += g;
      },
      "sum");
}

template <typename T>
Var<T> im2col(Var<T> x, std::size_t kernel) {
  const auto& X = x.value();
  require(kernel >= 1 && kernel <= X.rows(), "im2col",
          "kernel " + std::to_string(kernel) + " for input " + X.shape().str());
  const std::size_t len = X.rows() - kernel + 1;
  const std::size_t ch = X.cols();
  Tensor<T> out(len, kernel * ch);
  for (std::size_t p = 0; p < len; ++p)
    for (std::size_t k = 0; k < kernel; ++k)
      for (std::size_t c = 0; c < ch; ++c) out(p, k * ch + c) = X(p + k, c);
  return x.tape().record(
      std::move(out), {x},
      [ix = x.id(), kernel, ch](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ix)) return;
        const auto& G = t.grad(self);
        auto& GX = t.grad(ix);
        for (std::size_t p = 0; p < G.rows(); ++p)
          for (std::size_t k = 0; k < kernel; ++k)
            for (std::size_t c = 0; c < ch; ++c) GX(p + k, c) += G(p, k * ch + c);
      },
      "im2col");
}

template <typename T>
Var<T> conv1d(Var<T> x, Var<T> weight, Var<T> bias, std::size_t kernel) {
  require(weight.rows() == kernel * x.cols(), "conv1d",
          "weight " + weight.shape().str() + " for kernel " + std::to_string(kernel) +
              " and input " + x.shape().str());
  return add_row(matmul(im2col(x, kernel), weight), bias);
}

template <typename T>
Var<T> mse(Var<T> pred, Var<T> target) {
  auto& tape = common_tape(pred, target, "mse");
  require(pred.shape() == target.shape(), "mse",
          pred.shape().str() + " vs " + target.shape().str());
  const auto& P = pred.value();
  const auto& Y = target.value();
  T total{0};
  for (std::size_t i = 0; i < P.size(); ++i) total += (P[i] - Y[i]) * (P[i] - Y[i]);
  const T inv = T{1} / static_cast<T>(P.size());
  return tape.record(
      Tensor<T>::scalar(total * inv), {pred, target},
      [ip = pred.id(), iy = target.id(), inv](Tape<T>& t, std::uint32_t self) {
        const T g = t.grad(self)[0];
        const auto& P = t.value(ip);
        const auto& Y = t.value(iy);
        if (t.requires_grad(ip)) {
          auto& GP = t.grad(ip);
          for (std::size_t i = 0; i < P.size(); ++i) GP[i] += g * T{2} * (P[i] - Y[i]) * inv;
        }
        if (t.requires_grad(iy)) {
          auto& GY = t.grad(iy);
          for (std::size_t i = 0; i < P.size(); ++i) GY[i] -= g * T{2} * (P[i] - Y[i]) * inv;
        }
      },
      "mse");
}

template <typename T>
Var<T> weighted_mse(Var<T> pred, const Tensor<T>& target, const Tensor<T>& weights) {
  const auto& P = pred.value();
  require(P.shape() == target.shape() && P.shape() == weights.shape(), "weighted_mse",
          P.shape().str() + " vs " + target.shape().str() + " / " + weights.shape().str());
  T wsum{0};
  T total{0};
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (weights[i] == T{0}) continue;
    const T d = P[i] - target[i];
    wsum += weights[i];
    total += weights[i] * d * d;
  }
  if (!(wsum > T{0})) throw ShapeError("weighted_mse: weights sum to zero");
  const T inv = T{1} / wsum;
  return pred.tape().record(
      Tensor<T>::scalar(total * inv), {pred},
      [ip = pred.id(), target, weights, inv](Tape<T>& t, std::uint32_t self) {
        if (!t.requires_grad(ip)) return;
        const T g = t.grad(self)[0];
        const auto& P = t.value(ip);
        auto& GP = t.grad(ip);
        for (std::size_t i = 0; i < P.size(); ++i) {
          if (weights[i] == T{0}) continue;
          GP[i] += g * T{2} * weights[i] * (P[i] - target[i]) * inv;
        }
      },
      "weighted_mse");
}

template <typename T>
Var<T> dropout(Var<T> a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
  const auto& A = a.value();
  Tensor<T> keep(A.rows(), A.cols());
  std::bernoulli_distribution coin(1.0 - rate);
  const T factor = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = coin(rng) ? factor : T{0};
  return mul(a, a.tape().constant(std::move(keep)));
}

#define WF_INSTANTIATE_OPS(T)                                                           \
  template Var<T> add(Var<T>, Var<T>);                                                  \
  template Var<T> sub(Var<T>, Var<T>);                                                  \
  template Var<T> mul(Var<T>, Var<T>);                                                  \
  template Var<T> scale(Var<T>, T);                                                     \
  template Var<T> add_row(Var<T>, Var<T>);                                              \
  template Var<T> mul_row(Var<T>, Var<T>);                                              \
  template Var<T> matmul(Var<T>, Var<T>);                                               \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                            \
  template Var<T> transpose(Var<T>);                                                    \
  template Var<T> relu(Var<T>);                                                         \
  template Var<T> gelu(Var<T>);                                                         \
  template Var<T> tanh(Var<T>);                                                         \
  template Var<T> sigmoid(Var<T>);                                                      \
  template Var<T> softmax_rows(Var<T>, std::span<const bool>);                          \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                \
  template Var<T> embedding(Var<T>, std::span<const std::size_t>);                      \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                              \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                              \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                         \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                         \
  template Var<T> reshape(Var<T>, std::size_t, std::size_t);                            \
  template Var<T> mean_rows(Var<T>);                                                    \
  template Var<T> sum(Var<T>);                                                          \
  template Var<T> im2col(Var<T>, std::size_t);                                          \
  template Var<T> conv1d(Var<T>, Var<T>, Var<T>, std::size_t);                          \
  template Var<T> mse(Var<T>, Var<T>);                                                  \
  template Var<T> weighted_mse(Var<T>, const Tensor<T>&, const Tensor<T>&);             \
  template Var<T> dropout(Var<T>, double, std::mt19937_64&);

WF_INSTANTIATE_OPS(float)
WF_INSTANTIATE_OPS(double)

#undef WF_INSTANTIATE_OPS

}  // namespace wf::ad
