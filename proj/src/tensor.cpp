#include "argf/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace argf {

namespace {

std::atomic<std::uint64_t> g_next_node_id{1};

void resolve_rows_cols(const std::vector<std::size_t>& shape, std::size_t& rows,
                       std::size_t& cols) {
  switch (shape.size()) {
    case 0: rows = 1; cols = 1; break;
    case 1: rows = 1; cols = shape[0]; break;
    case 2: rows = shape[0]; cols = shape[1]; break;
    default:
      throw std::invalid_argument("tensor rank > 2 not supported, got shape " +
                                  shape_str(shape));
  }
}

std::shared_ptr<Tensor::Node> make_node(const std::vector<std::size_t>& shape,
                                        std::vector<double> values, bool requires_grad) {
  auto n = std::make_shared<Tensor::Node>();
  n->shape = shape;
  resolve_rows_cols(shape, n->rows, n->cols);
  const std::size_t count = n->rows * n->cols;
  if (values.empty()) values.assign(count, 0.0);
  if (values.size() != count) {
    throw std::invalid_argument("tensor value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  n->values = std::move(values);
  n->grad.assign(count, 0.0);
  n->requires_grad = requires_grad;
  n->id = g_next_node_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// Result node wired to its parents; requires_grad is inherited.
Tensor make_op(const std::vector<std::size_t>& shape, std::vector<double> values,
               std::vector<Tensor> parents, std::function<void(Tensor::Node&)> backward_fn) {
  auto n = make_node(shape, std::move(values), false);
  for (const auto& p : parents) {
    n->requires_grad = n->requires_grad || p.requires_grad();
    n->parents.push_back(p.node_ptr());
  }
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  return Tensor(n);
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) +
                                " vs " + shape_str(b));
  }
}

}  // namespace

// -- Tensor basics ----------------------------------------------------------

Tensor Tensor::zeros(const std::vector<std::size_t>& shape, bool requires_grad) {
  return Tensor(make_node(shape, {}, requires_grad));
}

Tensor Tensor::full(const std::vector<std::size_t>& shape, double value, bool requires_grad) {
  std::size_t rows, cols;
  resolve_rows_cols(shape, rows, cols);
  return Tensor(make_node(shape, std::vector<double>(rows * cols, value), requires_grad));
}

Tensor Tensor::from(const std::vector<std::size_t>& shape, std::vector<double> values,
                    bool requires_grad) {
  return Tensor(make_node(shape, std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_node({1, 1}, {value}, requires_grad));
}

const std::vector<std::size_t>& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::rows() const { return node_->rows; }
std::size_t Tensor::cols() const { return node_->cols; }
std::size_t Tensor::size() const { return node_->values.size(); }
std::uint64_t Tensor::node_id() const { return node_->id; }
bool Tensor::requires_grad() const { return node_->requires_grad; }

const std::vector<double>& Tensor::values() const& { return node_->values; }
std::vector<double>& Tensor::values() & { return node_->values; }
std::vector<double> Tensor::values() && { return node_->values; }
const std::vector<double>& Tensor::grad() const& { return node_->grad; }
std::vector<double>& Tensor::grad() & { return node_->grad; }
std::vector<double> Tensor::grad() && { return node_->grad; }

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("item(): tensor of shape " + shape_str(*this) +
                                " is not a scalar");
  }
  return node_->values[0];
}

void Tensor::set_values(const std::vector<double>& v) {
  if (v.size() != size()) {
    throw std::invalid_argument("set_values: got " + std::to_string(v.size()) +
                                " values for shape " + shape_str(*this));
  }
  node_->values = v;
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

void Tensor::clamp_values(double lo, double hi) {
  for (auto& v : node_->values) v = std::min(hi, std::max(lo, v));
}

Tensor Tensor::detach() const {
  return Tensor(make_node(node_->shape, node_->values, false));
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::string shape_str(const Tensor& t) {
  return t.defined() ? shape_str(t.shape()) : std::string("(undefined)");
}

// -- backward ---------------------------------------------------------------

void backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar()) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_str(loss));
  }
  // Reachable subgraph, then reverse creation order. Creation order is a
  // topological order under define-by-run, so sorting ids descending visits
  // every node after all of its children.
  std::vector<Tensor::Node*> nodes;
  std::unordered_set<Tensor::Node*> seen;
  std::vector<Tensor::Node*> stack{loss.node()};
  seen.insert(loss.node());
  while (!stack.empty()) {
    Tensor::Node* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (const auto& p : n->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  for (Tensor::Node* n : nodes) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  std::sort(nodes.begin(), nodes.end(),
            [](const Tensor::Node* a, const Tensor::Node* b) { return a->id > b->id; });
  loss.node()->grad[0] = 1.0;
  for (Tensor::Node* n : nodes) {
    if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
  }
}

// -- elementwise ops ---------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
    auto& ga = n.parents[0]->grad;
    auto& gb = n.parents[1]->grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      ga[i] += n.grad[i];
      gb[i] += n.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
    auto& ga = n.parents[0]->grad;
    auto& gb = n.parents[1]->grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      ga[i] += n.grad[i];
      gb[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      pa.grad[i] += n.grad[i] * pb.values[i];
      pb.grad[i] += n.grad[i] * pa.values[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape("div", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] / b.values()[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double inv = 1.0 / pb.values[i];
      pa.grad[i] += n.grad[i] * inv;
      pb.grad[i] -= n.grad[i] * pa.values[i] * inv * inv;
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
  return make_op(a.shape(), std::move(out), {a}, [c](Tensor::Node& n) {
    auto& ga = n.parents[0]->grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i] * c;
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + c;
  return make_op(a.shape(), std::move(out), {a}, [](Tensor::Node& n) {
    auto& ga = n.parents[0]->grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i];
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor sigmoid(const Tensor& a) {
  // Nudged into the open interval: extreme inputs would otherwise round to
  // exactly 0 or 1, and downstream contracts rely on strict (0,1).
  static const double lo = std::numeric_limits<double>::min();
  static const double hi = std::nextafter(1.0, 0.0);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::min(hi, std::max(lo, 1.0 / (1.0 + std::exp(-a.values()[i]))));
  }
  return make_op(a.shape(), std::move(out), {a}, [](Tensor::Node& n) {
    auto& ga = n.parents[0]->grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double y = n.values[i];
      ga[i] += n.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh_act(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
  return make_op(a.shape(), std::move(out), {a}, [](Tensor::Node& n) {
    auto& ga = n.parents[0]->grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double y = n.values[i];
      ga[i] += n.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.values()[i];
    out[i] = x > 0.0 ? x : slope * x;
  }
  return make_op(a.shape(), std::move(out), {a}, [slope](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      pa.grad[i] += n.grad[i] * (pa.values[i] > 0.0 ? 1.0 : slope);
    }
  });
}

Tensor clamped_log(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::log(std::min(hi, std::max(lo, a.values()[i])));
  }
  return make_op(a.shape(), std::move(out), {a}, [lo, hi](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double x = pa.values[i];
      if (x >= lo && x <= hi) pa.grad[i] += n.grad[i] / x;
    }
  });
}

// -- linear algebra -----------------------------------------------------------

Tensor matmul_t(const Tensor& x, const Tensor& w) {
  if (x.cols() != w.cols()) {
    throw std::invalid_argument("matmul_t: input " + shape_str(x) +
                                " does not match weight " + shape_str(w));
  }
  const std::size_t B = x.rows(), I = x.cols(), O = w.rows();
  std::vector<double> out(B * O, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < O; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < I; ++i) acc += x.values()[b * I + i] * w.values()[o * I + i];
      out[b * O + o] = acc;
    }
  }
  return make_op({B, O}, std::move(out), {x, w}, [B, I, O](Tensor::Node& n) {
    auto& px = *n.parents[0];
    auto& pw = *n.parents[1];
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t o = 0; o < O; ++o) {
        const double g = n.grad[b * O + o];
        if (g == 0.0) continue;
        for (std::size_t i = 0; i < I; ++i) {
          px.grad[b * I + i] += g * pw.values[o * I + i];
          pw.grad[o * I + i] += g * px.values[b * I + i];
        }
      }
    }
  });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.cols() != w.cols()) {
    throw std::invalid_argument("affine: input " + shape_str(x) +
                                " does not match weight " + shape_str(w));
  }
  if (b.size() != w.rows()) {
    throw std::invalid_argument("affine: bias " + shape_str(b) + " does not match weight " +
                                shape_str(w));
  }
  const std::size_t B = x.rows(), I = x.cols(), O = w.rows();
  std::vector<double> out(B * O);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t o = 0; o < O; ++o) {
      double acc = b.values()[o];
      for (std::size_t i = 0; i < I; ++i) acc += x.values()[r * I + i] * w.values()[o * I + i];
      out[r * O + o] = acc;
    }
  }
  return make_op({B, O}, std::move(out), {x, w, b}, [B, I, O](Tensor::Node& n) {
    auto& px = *n.parents[0];
    auto& pw = *n.parents[1];
    auto& pb = *n.parents[2];
    for (std::size_t r = 0; r < B; ++r) {
      for (std::size_t o = 0; o < O; ++o) {
        const double g = n.grad[r * O + o];
        if (g == 0.0) continue;
        pb.grad[o] += g;
        for (std::size_t i = 0; i < I; ++i) {
          px.grad[r * I + i] += g * pw.values[o * I + i];
          pw.grad[o * I + i] += g * px.values[r * I + i];
        }
      }
    }
  });
}

// -- structure ops -------------------------------------------------------------

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t B = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != B) {
      throw std::invalid_argument("concat_cols: row mismatch " + shape_str(parts[0]) +
                                  " vs " + shape_str(p));
    }
    total += p.cols();
  }
  std::vector<double> out(B * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t C = p.cols();
    for (std::size_t r = 0; r < B; ++r) {
      for (std::size_t c = 0; c < C; ++c) out[r * total + offset + c] = p.values()[r * C + c];
    }
    offset += C;
  }
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.cols());
  return make_op({B, total}, std::move(out), parts, [B, total, widths](Tensor::Node& n) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      auto& pk = *n.parents[k];
      const std::size_t C = widths[k];
      for (std::size_t r = 0; r < B; ++r) {
        for (std::size_t c = 0; c < C; ++c) pk.grad[r * C + c] += n.grad[r * total + offset + c];
      }
      offset += C;
    }
  });
}

Tensor slice_col(const Tensor& a, std::size_t j) {
  if (j >= a.cols()) {
    throw std::invalid_argument("slice_col: column " + std::to_string(j) +
                                " out of range for " + shape_str(a));
  }
  const std::size_t B = a.rows(), C = a.cols();
  std::vector<double> out(B);
  for (std::size_t r = 0; r < B; ++r) out[r] = a.values()[r * C + j];
  return make_op({B, 1}, std::move(out), {a}, [B, C, j](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    for (std::size_t r = 0; r < B; ++r) pa.grad[r * C + j] += n.grad[r];
  });
}

Tensor mul_colbcast(const Tensor& x, const Tensor& s) {
  if (s.rows() != x.rows() || s.cols() != 1) {
    throw std::invalid_argument("mul_colbcast: scale " + shape_str(s) +
                                " must be (rows,1) for input " + shape_str(x));
  }
  const std::size_t B = x.rows(), C = x.cols();
  std::vector<double> out(B * C);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] = x.values()[r * C + c] * s.values()[r];
  }
  return make_op(x.shape(), std::move(out), {x, s}, [B, C](Tensor::Node& n) {
    auto& px = *n.parents[0];
    auto& ps = *n.parents[1];
    for (std::size_t r = 0; r < B; ++r) {
      for (std::size_t c = 0; c < C; ++c) {
        px.grad[r * C + c] += n.grad[r * C + c] * ps.values[r];
        ps.grad[r] += n.grad[r * C + c] * px.values[r * C + c];
      }
    }
  });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) {
    throw std::invalid_argument("scale_by: scale must be one element, got " + shape_str(s));
  }
  const double sv = s.values()[0];
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * sv;
  return make_op(x.shape(), std::move(out), {x, s}, [](Tensor::Node& n) {
    auto& px = *n.parents[0];
    auto& ps = *n.parents[1];
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      px.grad[i] += n.grad[i] * ps.values[0];
      ps.grad[0] += n.grad[i] * px.values[i];
    }
  });
}

Tensor pairwise_outer(const Tensor& x, const Tensor& y) {
  if (x.rows() != y.rows()) {
    throw std::invalid_argument("pairwise_outer: row mismatch " + shape_str(x) + " vs " +
                                shape_str(y));
  }
  const std::size_t B = x.rows(), P = x.cols(), Q = y.cols();
  std::vector<double> out(B * P * Q);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < P; ++i) {
      const double xv = x.values()[b * P + i];
      for (std::size_t j = 0; j < Q; ++j) out[(b * P + i) * Q + j] = xv * y.values()[b * Q + j];
    }
  }
  return make_op({B, P * Q}, std::move(out), {x, y}, [B, P, Q](Tensor::Node& n) {
    auto& px = *n.parents[0];
    auto& py = *n.parents[1];
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < P; ++i) {
        for (std::size_t j = 0; j < Q; ++j) {
          const double g = n.grad[(b * P + i) * Q + j];
          px.grad[b * P + i] += g * py.values[b * Q + j];
          py.grad[b * Q + j] += g * px.values[b * P + i];
        }
      }
    }
  });
}

// -- reductions ----------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_op({1, 1}, {acc}, {a}, [](Tensor::Node& n) {
    auto& ga = n.parents[0]->grad;
    for (auto& g : ga) g += n.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  return make_op({1, 1}, {acc * inv}, {a}, [inv](Tensor::Node& n) {
    auto& ga = n.parents[0]->grad;
    for (auto& g : ga) g += n.grad[0] * inv;
  });
}

Tensor row_sum(const Tensor& a) {
  const std::size_t B = a.rows(), C = a.cols();
  std::vector<double> out(B, 0.0);
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t c = 0; c < C; ++c) out[r] += a.values()[r * C + c];
  }
  return make_op({B, 1}, std::move(out), {a}, [B, C](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    for (std::size_t r = 0; r < B; ++r) {
      for (std::size_t c = 0; c < C; ++c) pa.grad[r * C + c] += n.grad[r];
    }
  });
}

Tensor row_l2norm(const Tensor& a) {
  const std::size_t B = a.rows(), C = a.cols();
  std::vector<double> out(B, 0.0);
  for (std::size_t r = 0; r < B; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double v = a.values()[r * C + c];
      acc += v * v;
    }
    out[r] = std::sqrt(acc);
  }
  return make_op({B, 1}, std::move(out), {a}, [B, C](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    for (std::size_t r = 0; r < B; ++r) {
      const double norm = n.values[r];
      if (norm == 0.0) continue;  // subgradient 0 at the origin
      const double g = n.grad[r] / norm;
      for (std::size_t c = 0; c < C; ++c) pa.grad[r * C + c] += g * pa.values[r * C + c];
    }
  });
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t B = a.rows(), C = a.cols();
  std::vector<double> out(B * C);
  for (std::size_t r = 0; r < B; ++r) {
    double mx = a.values()[r * C];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, a.values()[r * C + c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      out[r * C + c] = std::exp(a.values()[r * C + c] - mx);
      denom += out[r * C + c];
    }
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] /= denom;
  }
  return make_op(a.shape(), std::move(out), {a}, [B, C](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    for (std::size_t r = 0; r < B; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < C; ++c) dot += n.grad[r * C + c] * n.values[r * C + c];
      for (std::size_t c = 0; c < C; ++c) {
        pa.grad[r * C + c] += n.values[r * C + c] * (n.grad[r * C + c] - dot);
      }
    }
  });
}

Tensor row_standardize(const Tensor& a, double eps) {
  const std::size_t B = a.rows(), C = a.cols();
  std::vector<double> out(B * C);
  std::vector<double> inv_std(B);
  for (std::size_t r = 0; r < B; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) mean += a.values()[r * C + c];
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = a.values()[r * C + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(C);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < C; ++c) out[r * C + c] = (a.values()[r * C + c] - mean) * inv_std[r];
  }
  return make_op(a.shape(), std::move(out), {a}, [B, C, inv_std](Tensor::Node& n) {
    auto& pa = *n.parents[0];
    const double invC = 1.0 / static_cast<double>(C);
    for (std::size_t r = 0; r < B; ++r) {
      double gmean = 0.0, gydot = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        gmean += n.grad[r * C + c];
        gydot += n.grad[r * C + c] * n.values[r * C + c];
      }
      gmean *= invC;
      gydot *= invC;
      for (std::size_t c = 0; c < C; ++c) {
        pa.grad[r * C + c] +=
            inv_std[r] * (n.grad[r * C + c] - gmean - n.values[r * C + c] * gydot);
      }
    }
  });
}

}  // namespace argf
