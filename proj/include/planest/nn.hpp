#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "planest/mat.hpp"

namespace planest {

// Reverse-mode tape over a small fixed set of dense ops. Values are computed
// eagerly; backward() runs one reverse sweep. The same code drives float32
// training and the float64 shadow used by gradient checks.
template <class T>
class Tape {
 public:
  using Id = int32_t;

  enum class Op : uint8_t {
    Leaf,
    Param,
    Affine,
    Relu,
    Sigmoid,
    Tanh,
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    ConcatCols,
    ConcatRows,
    GatherRows,
    ScaleShift,
    MeanAll,
  };

  Id input(Mat<T> v) { return push(Op::Leaf, std::move(v), {}, false); }
  Id param(Mat<T> v) { return push(Op::Param, std::move(v), {}, true); }

  Id zeros(int rows, int cols) { return input(Mat<T>::zeros(rows, cols)); }

  // act(x W^T + b): x is (n, in), W (out, in), b (1, out).
  Id affine(Id W, Id b, Id x) {
    const Mat<T>&w = val(W), &bias = val(b), &xm = val(x);
    if (w.cols != xm.cols || bias.cols != w.rows || bias.rows != 1)
      throw model_error("affine shape mismatch: W(" + shape(w) + ") b(" +
                        shape(bias) + ") x(" + shape(xm) + ")");
    Mat<T> y(xm.rows, w.rows);
    for (int r = 0; r < xm.rows; ++r) {
      const T* xr = xm.row(r);
      T* yr = y.row(r);
      for (int o = 0; o < w.rows; ++o) {
        const T* wo = w.row(o);
        T acc = bias(0, o);
        for (int k = 0; k < w.cols; ++k) acc += xr[k] * wo[k];
        yr[o] = acc;
      }
    }
    return push(Op::Affine, std::move(y), {W, b, x});
  }

  Id relu(Id x) {
    Mat<T> y = val(x);
    for (auto& v : y.d) v = v > T(0) ? v : T(0);
    return push(Op::Relu, std::move(y), {x});
  }

  Id sigmoid(Id x) {
    Mat<T> y = val(x);
    for (auto& v : y.d) v = T(1) / (T(1) + std::exp(-v));
    return push(Op::Sigmoid, std::move(y), {x});
  }

  Id tanh_(Id x) {
    Mat<T> y = val(x);
    for (auto& v : y.d) v = std::tanh(v);
    return push(Op::Tanh, std::move(y), {x});
  }

  Id add(Id a, Id b) { return binary(Op::Add, a, b); }
  Id sub(Id a, Id b) { return binary(Op::Sub, a, b); }
  Id mul(Id a, Id b) { return binary(Op::Mul, a, b); }
  Id div(Id a, Id b) { return binary(Op::Div, a, b); }
  // Elementwise pair pooling; ties route the gradient to the left input.
  Id pmin(Id a, Id b) { return binary(Op::Min, a, b); }
  Id pmax(Id a, Id b) { return binary(Op::Max, a, b); }

  Id concat_cols(std::span<const Id> parts) {
    if (parts.empty()) throw model_error("concat_cols of nothing");
    int rows = val(parts[0]).rows, cols = 0;
    for (Id p : parts) {
      if (val(p).rows != rows) throw model_error("concat_cols row mismatch");
      cols += val(p).cols;
    }
    Mat<T> y(rows, cols);
    int at = 0;
    for (Id p : parts) {
      const Mat<T>& m = val(p);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < m.cols; ++c) y(r, at + c) = m(r, c);
      at += m.cols;
    }
    return push(Op::ConcatCols, std::move(y), {parts.begin(), parts.end()});
  }

  Id concat_rows(std::span<const Id> parts) {
    if (parts.empty()) throw model_error("concat_rows of nothing");
    int cols = val(parts[0]).cols, rows = 0;
    for (Id p : parts) {
      if (val(p).cols != cols) throw model_error("concat_rows col mismatch");
      rows += val(p).rows;
    }
    Mat<T> y(rows, cols);
    int at = 0;
    for (Id p : parts) {
      const Mat<T>& m = val(p);
      for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < cols; ++c) y(at + r, c) = m(r, c);
      at += m.rows;
    }
    return push(Op::ConcatRows, std::move(y), {parts.begin(), parts.end()});
  }

  // Row i of the result is row idx[i] of x; index -1 yields a zero row.
  Id gather_rows(Id x, std::vector<int32_t> idx) {
    const Mat<T>& m = val(x);
    Mat<T> y(static_cast<int>(idx.size()), m.cols);
    for (size_t i = 0; i < idx.size(); ++i) {
      int32_t s = idx[i];
      if (s < 0) continue;
      if (s >= m.rows) throw model_error("gather_rows index out of range");
      for (int c = 0; c < m.cols; ++c) y(static_cast<int>(i), c) = m(s, c);
    }
    Id id = push(Op::GatherRows, std::move(y), {x});
    nodes_[id].gather = std::move(idx);
    return id;
  }

  Id scale_shift(Id x, T a, T b) {
    Mat<T> y = val(x);
    for (auto& v : y.d) v = a * v + b;
    Id id = push(Op::ScaleShift, std::move(y), {x});
    nodes_[id].alpha = a;
    return id;
  }

  Id mean_all(Id x) {
    const Mat<T>& m = val(x);
    if (m.empty()) throw model_error("mean of an empty tensor");
    T acc = T(0);
    for (const auto& v : m.d) acc += v;
    Mat<T> y(1, 1);
    y(0, 0) = acc / static_cast<T>(m.size());
    return push(Op::MeanAll, std::move(y), {x});
  }

  const Mat<T>& value(Id id) const { return nodes_[id].val; }
  const Mat<T>& gradient(Id id) const { return nodes_[id].grad; }
  T scalar(Id id) const { return val(id)(0, 0); }
  size_t size() const { return nodes_.size(); }

  void backward(Id loss) {
    const Mat<T>& l = val(loss);
    if (l.rows != 1 || l.cols != 1)
      throw model_error("backward target must be a scalar");
    for (auto& n : nodes_)
      if (n.needs_grad) n.grad = Mat<T>::zeros(n.val.rows, n.val.cols);
    if (!nodes_[loss].needs_grad) return;  // constant graph
    nodes_[loss].grad(0, 0) = T(1);
    for (Id id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.empty()) continue;
      backprop(id, n);
    }
  }

 private:
  struct Node {
    Op op;
    Mat<T> val;
    Mat<T> grad;
    std::vector<Id> args;
    std::vector<int32_t> gather;
    T alpha{};
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;

  const Mat<T>& val(Id id) const { return nodes_[id].val; }

  static std::string shape(const Mat<T>& m) {
    return std::to_string(m.rows) + "x" + std::to_string(m.cols);
  }

  Id push(Op op, Mat<T> v, std::vector<Id> args, bool force_grad = false) {
    for (const auto& x : v.d)
      if (!std::isfinite(static_cast<double>(x)))
        throw model_error("non-finite value produced by tape op");
    Node n;
    n.op = op;
    n.val = std::move(v);
    n.args = std::move(args);
    n.needs_grad = force_grad;
    for (Id a : n.args) n.needs_grad = n.needs_grad || nodes_[a].needs_grad;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id binary(Op op, Id a, Id b) {
    const Mat<T>&ma = val(a), &mb = val(b);
    if (!ma.same_shape(mb))
      throw model_error("elementwise shape mismatch: " + shape(ma) + " vs " +
                        shape(mb));
    Mat<T> y(ma.rows, ma.cols);
    for (size_t i = 0; i < ma.size(); ++i) {
      switch (op) {
        case Op::Add:
          y.d[i] = ma.d[i] + mb.d[i];
          break;
        case Op::Sub:
          y.d[i] = ma.d[i] - mb.d[i];
          break;
        case Op::Mul:
          y.d[i] = ma.d[i] * mb.d[i];
          break;
        case Op::Div:
          y.d[i] = ma.d[i] / mb.d[i];
          break;
        case Op::Min:
          y.d[i] = ma.d[i] <= mb.d[i] ? ma.d[i] : mb.d[i];
          break;
        case Op::Max:
          y.d[i] = ma.d[i] >= mb.d[i] ? ma.d[i] : mb.d[i];
          break;
        default:
          throw model_error("bad binary op");
      }
    }
    return push(op, std::move(y), {a, b});
  }

  Mat<T>* grad_of(Id id) {
    Node& n = nodes_[id];
    return n.needs_grad ? &n.grad : nullptr;
  }

  void backprop(Id id, Node& n) {
    const Mat<T>& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Param:
        return;
      case Op::Affine: {
        const Mat<T>& w = val(n.args[0]);
        const Mat<T>& x = val(n.args[2]);
        if (Mat<T>* dw = grad_of(n.args[0])) {
          for (int r = 0; r < x.rows; ++r) {
            const T* xr = x.row(r);
            const T* gr = g.row(r);
            for (int o = 0; o < w.rows; ++o) {
              T go = gr[o];
              if (go == T(0)) continue;
              T* dwo = dw->row(o);
              for (int k = 0; k < w.cols; ++k) dwo[k] += go * xr[k];
            }
          }
        }
        if (Mat<T>* db = grad_of(n.args[1])) {
          for (int r = 0; r < g.rows; ++r) {
            const T* gr = g.row(r);
            for (int o = 0; o < g.cols; ++o) (*db)(0, o) += gr[o];
          }
        }
        if (Mat<T>* dx = grad_of(n.args[2])) {
          for (int r = 0; r < x.rows; ++r) {
            const T* gr = g.row(r);
            T* dxr = dx->row(r);
            for (int o = 0; o < w.rows; ++o) {
              T go = gr[o];
              if (go == T(0)) continue;
              const T* wo = w.row(o);
              for (int k = 0; k < w.cols; ++k) dxr[k] += go * wo[k];
            }
          }
        }
        return;
      }
      case Op::Relu: {
        if (Mat<T>* dx = grad_of(n.args[0])) {
          const Mat<T>& x = val(n.args[0]);
          for (size_t i = 0; i < g.size(); ++i)
            if (x.d[i] > T(0)) dx->d[i] += g.d[i];
        }
        return;
      }
      case Op::Sigmoid: {
        if (Mat<T>* dx = grad_of(n.args[0]))
          for (size_t i = 0; i < g.size(); ++i)
            dx->d[i] += g.d[i] * n.val.d[i] * (T(1) - n.val.d[i]);
        return;
      }
      case Op::Tanh: {
        if (Mat<T>* dx = grad_of(n.args[0]))
          for (size_t i = 0; i < g.size(); ++i)
            dx->d[i] += g.d[i] * (T(1) - n.val.d[i] * n.val.d[i]);
        return;
      }
      case Op::Add: {
        if (Mat<T>* da = grad_of(n.args[0]))
          for (size_t i = 0; i < g.size(); ++i) da->d[i] += g.d[i];
        if (Mat<T>* db = grad_of(n.args[1]))
          for (size_t i = 0; i < g.size(); ++i) db->d[i] += g.d[i];
        return;
      }
      case Op::Sub: {
        if (Mat<T>* da = grad_of(n.args[0]))
          for (size_t i = 0; i < g.size(); ++i) da->d[i] += g.d[i];
        if (Mat<T>* db = grad_of(n.args[1]))
          for (size_t i = 0; i < g.size(); ++i) db->d[i] -= g.d[i];
        return;
      }
      case Op::Mul: {
        const Mat<T>&a = val(n.args[0]), &b = val(n.args[1]);
        if (Mat<T>* da = grad_of(n.args[0]))
          for (size_t i = 0; i < g.size(); ++i) da->d[i] += g.d[i] * b.d[i];
        if (Mat<T>* db = grad_of(n.args[1]))
          for (size_t i = 0; i < g.size(); ++i) db->d[i] += g.d[i] * a.d[i];
        return;
      }
      case Op::Div: {
        const Mat<T>&a = val(n.args[0]), &b = val(n.args[1]);
        if (Mat<T>* da = grad_of(n.args[0]))
          for (size_t i = 0; i < g.size(); ++i) da->d[i] += g.d[i] / b.d[i];
        if (Mat<T>* db = grad_of(n.args[1]))
          for (size_t i = 0; i < g.size(); ++i)
            db->d[i] -= g.d[i] * a.d[i] / (b.d[i] * b.d[i]);
        return;
      }
      case Op::Min:
      case Op::Max: {
        const Mat<T>&a = val(n.args[0]), &b = val(n.args[1]);
        Mat<T>* da = grad_of(n.args[0]);
        Mat<T>* db = grad_of(n.args[1]);
        for (size_t i = 0; i < g.size(); ++i) {
          bool left = n.op == Op::Min ? a.d[i] <= b.d[i] : a.d[i] >= b.d[i];
          if (left) {
            if (da) da->d[i] += g.d[i];
          } else if (db) {
            db->d[i] += g.d[i];
          }
        }
        return;
      }
      case Op::ConcatCols: {
        int at = 0;
        for (Id arg : n.args) {
          const Mat<T>& m = val(arg);
          if (Mat<T>* dm = grad_of(arg))
            for (int r = 0; r < m.rows; ++r)
              for (int c = 0; c < m.cols; ++c) (*dm)(r, c) += g(r, at + c);
          at += m.cols;
        }
        return;
      }
      case Op::ConcatRows: {
        int at = 0;
        for (Id arg : n.args) {
          const Mat<T>& m = val(arg);
          if (Mat<T>* dm = grad_of(arg))
            for (int r = 0; r < m.rows; ++r)
              for (int c = 0; c < m.cols; ++c) (*dm)(r, c) += g(at + r, c);
          at += m.rows;
        }
        return;
      }
      case Op::GatherRows: {
        if (Mat<T>* dx = grad_of(n.args[0])) {
          for (size_t i = 0; i < n.gather.size(); ++i) {
            int32_t s = n.gather[i];
            if (s < 0) continue;
            for (int c = 0; c < g.cols; ++c)
              (*dx)(s, c) += g(static_cast<int>(i), c);
          }
        }
        return;
      }
      case Op::ScaleShift: {
        if (Mat<T>* dx = grad_of(n.args[0]))
          for (size_t i = 0; i < g.size(); ++i) dx->d[i] += n.alpha * g.d[i];
        return;
      }
      case Op::MeanAll: {
        if (Mat<T>* dx = grad_of(n.args[0])) {
          T s = g(0, 0) / static_cast<T>(dx->size());
          for (auto& v : dx->d) v += s;
        }
        return;
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Recurrent cell of the representation layer
// ---------------------------------------------------------------------------

// Tape ids of the four gate blocks, each mapping concat[R_prev, x] to the
// hidden width.
template <class T>
struct CellParamIds {
  typename Tape<T>::Id Wf, bf, Wk1, bk1, Wr, br, Wk2, bk2;
};

// One step of the gated cell:
//   f  = sigmoid(Wf  [R,x] + bf)      k1 = sigmoid(Wk1 [R,x] + bk1)
//   r  = tanh   (Wr  [R,x] + br)      k2 = sigmoid(Wk2 [R,x] + bk2)
//   G' = f * G + k1 * r               R' = k2 * tanh(G')
// Children are fused by the caller (averaging); leaves pass zero states.
template <class T>
std::pair<typename Tape<T>::Id, typename Tape<T>::Id> lstm_cell(
    Tape<T>& t, const CellParamIds<T>& p, typename Tape<T>::Id x,
    typename Tape<T>::Id g_prev, typename Tape<T>::Id r_prev,
    uint64_t* invocations = nullptr) {
  std::array<typename Tape<T>::Id, 2> cat_parts{r_prev, x};
  auto cat = t.concat_cols(cat_parts);
  auto f = t.sigmoid(t.affine(p.Wf, p.bf, cat));
  auto k1 = t.sigmoid(t.affine(p.Wk1, p.bk1, cat));
  auto r = t.tanh_(t.affine(p.Wr, p.br, cat));
  auto k2 = t.sigmoid(t.affine(p.Wk2, p.bk2, cat));
  auto g = t.add(t.mul(f, g_prev), t.mul(k1, r));
  auto rep = t.mul(k2, t.tanh_(g));
  if (invocations) ++*invocations;
  return {g, rep};
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// Named float32 parameter blocks in a fixed order; the order defines the
// checkpoint layout and the Adam state layout.
struct ParamStore {
  std::vector<std::pair<std::string, MatF>> entries;

  MatF& add(const std::string& name, int rows, int cols);
  // U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = cols.
  MatF& add_weight(const std::string& name, int out, int in,
                   std::mt19937_64& rng);
  MatF& add_bias(const std::string& name, int n);

  MatF& get(const std::string& name);
  const MatF& get(const std::string& name) const;
  bool has(const std::string& name) const;

  std::vector<MatD> shadow() const;  // float64 copies, entry order
  void assign(const std::vector<MatF>& values);

  void write(std::ostream& out) const;
  static ParamStore read(std::istream& in);
};

// Deterministic double in [0,1) from a raw 64-bit draw.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  std::vector<MatF> m, v;
  int64_t step = 0;
};

// Standard Adam with bias correction, applied in entry order.
void adam_step(std::vector<MatF*> params, const std::vector<const MatF*>& grads,
               AdamState& state, const AdamConfig& cfg);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

struct GradCheckOptions {
  double h = 1e-3;
  // 0 checks every coordinate; otherwise a seeded uniform subset of this size
  // is checked across all parameter blocks.
  int max_coords = 0;
  uint64_t seed = 17;
  // Central differences at h and h/2 must agree to this relative tolerance or
  // the coordinate is skipped as non-smooth (ReLU kink / pooling tie).
  double kink_tol = 0.05;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;
};

using GraphBuilder = std::function<Tape<double>::Id(
    Tape<double>&, const std::vector<Tape<double>::Id>&)>;

// Compares the tape gradient of f against central differences, in float64.
GradCheckReport grad_check(const GraphBuilder& f, std::vector<MatD> params,
                           const GradCheckOptions& opt = {});

}  // namespace planest
