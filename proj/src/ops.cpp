#include "kaconv/ops.hpp"

#include <cmath>
#include <numbers>

namespace kaconv {

namespace {

void check_finite(const ArrayX& values, const char* op) {
  if (!values.allFinite())
    fail(ErrorKind::numeric_failure,
         std::string(op) + " produced a non-finite value");
}

bool want_record(Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (tape == nullptr || !tape->recording()) return false;
  for (const Tensor* t : inputs)
    if (t != nullptr && t->tracked()) return true;
  return false;
}

Tensor make_output(Shape shape, ArrayX data, const char* op) {
  check_finite(data, op);
  return Tensor::from_array(std::move(shape), std::move(data));
}

// ---------------------------------------------------------------------------
// Broadcasting
// ---------------------------------------------------------------------------

struct BroadcastPlan {
  Shape out_shape;
  std::vector<Index> out_dims;  // same as out_shape, ndim-aligned
  std::vector<Index> a_strides;
  std::vector<Index> b_strides;
  Index out_numel = 0;
  bool same_shape = false;
};

std::vector<Index> strides_for(const Shape& shape, const Shape& out) {
  const size_t nd = out.size();
  const size_t offset = nd - shape.size();
  std::vector<Index> strides(nd, 0);
  Index running = 1;
  for (size_t i = shape.size(); i-- > 0;) {
    if (shape[i] != 1) strides[offset + i] = running;
    running *= shape[i];
  }
  return strides;
}

BroadcastPlan make_broadcast_plan(const Shape& a, const Shape& b,
                                  const char* op) {
  BroadcastPlan plan;
  const size_t nd = std::max(a.size(), b.size());
  plan.out_shape.resize(nd);
  for (size_t i = 0; i < nd; ++i) {
    const Index da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
    const Index db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
    require(da == db || da == 1 || db == 1, ErrorKind::invalid_argument,
            std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                shape_str(b));
    plan.out_shape[i] = std::max(da, db);
  }
  plan.same_shape = (a == b);
  plan.out_numel = shape_numel(plan.out_shape);
  plan.a_strides = strides_for(a, plan.out_shape);
  plan.b_strides = strides_for(b, plan.out_shape);
  plan.out_dims = plan.out_shape;
  return plan;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  const size_t nd = plan.out_dims.size();
  std::vector<Index> counter(nd, 0);
  Index ia = 0, ib = 0;
  for (Index io = 0; io < plan.out_numel; ++io) {
    f(io, ia, ib);
    for (size_t axis = nd; axis-- > 0;) {
      ++counter[axis];
      ia += plan.a_strides[axis];
      ib += plan.b_strides[axis];
      if (counter[axis] < plan.out_dims[axis]) break;
      ia -= plan.a_strides[axis] * plan.out_dims[axis];
      ib -= plan.b_strides[axis] * plan.out_dims[axis];
      counter[axis] = 0;
    }
  }
}

enum class BinaryKind { add, sub, mul };

Tensor broadcast_binary(Tape* tape, const Tensor& a, const Tensor& b,
                        BinaryKind kind, const char* op) {
  const BroadcastPlan plan = make_broadcast_plan(a.shape(), b.shape(), op);
  ArrayX out(plan.out_numel);
  if (plan.same_shape) {
    switch (kind) {
      case BinaryKind::add: out = a.value() + b.value(); break;
      case BinaryKind::sub: out = a.value() - b.value(); break;
      case BinaryKind::mul: out = a.value() * b.value(); break;
    }
  } else {
    const ArrayX& av = a.value();
    const ArrayX& bv = b.value();
    for_each_broadcast(plan, [&](Index io, Index ia, Index ib) {
      switch (kind) {
        case BinaryKind::add: out[io] = av[ia] + bv[ib]; break;
        case BinaryKind::sub: out[io] = av[ia] - bv[ib]; break;
        case BinaryKind::mul: out[io] = av[ia] * bv[ib]; break;
      }
    });
  }
  Tensor result = make_output(plan.out_shape, std::move(out), op);
  if (want_record(tape, {&a, &b})) {
    result.set_tracked(true);
    tape->record([a, b, result, plan, kind]() mutable {
      if (!result.has_grad()) return;
      const ArrayX& gy = result.grad();
      if (a.tracked()) {
        ArrayX ga = ArrayX::Zero(a.numel());
        const ArrayX& bv = b.value();
        for_each_broadcast(plan, [&](Index io, Index ia, Index ib) {
          switch (kind) {
            case BinaryKind::add: ga[ia] += gy[io]; break;
            case BinaryKind::sub: ga[ia] += gy[io]; break;
            case BinaryKind::mul: ga[ia] += gy[io] * bv[ib]; break;
          }
        });
        a.accumulate_grad(ga);
      }
      if (b.tracked()) {
        ArrayX gb = ArrayX::Zero(b.numel());
        const ArrayX& av = a.value();
        for_each_broadcast(plan, [&](Index io, Index ia, Index ib) {
          switch (kind) {
            case BinaryKind::add: gb[ib] += gy[io]; break;
            case BinaryKind::sub: gb[ib] -= gy[io]; break;
            case BinaryKind::mul: gb[ib] += gy[io] * av[ia]; break;
          }
        });
        b.accumulate_grad(gb);
      }
    });
  }
  return result;
}

// Leading dimensions of a sequence tensor [.. x C x L].
struct SeqDims {
  Index batch;  // product of leading dims (1 when rank 2)
  Index channels;
  Index length;
  bool batched;
};

SeqDims seq_dims(const Tensor& x, const char* op) {
  const Shape& s = x.shape();
  require(s.size() == 2 || s.size() == 3, ErrorKind::invalid_argument,
          std::string(op) + ": expected [C x L] or [B x C x L], got " +
              shape_str(s));
  if (s.size() == 2) return {1, s[0], s[1], false};
  return {s[0], s[1], s[2], true};
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise / linear algebra
// ---------------------------------------------------------------------------

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  return broadcast_binary(tape, a, b, BinaryKind::add, "add");
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
  return broadcast_binary(tape, a, b, BinaryKind::sub, "sub");
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  return broadcast_binary(tape, a, b, BinaryKind::mul, "mul");
}

Tensor scale(Tape* tape, const Tensor& a, Scalar factor) {
  Tensor result = make_output(a.shape(), a.value() * factor, "scale");
  if (want_record(tape, {&a})) {
    result.set_tracked(true);
    tape->record([a, result, factor]() mutable {
      if (!result.has_grad()) return;
      a.accumulate_grad(result.grad() * factor);
    });
  }
  return result;
}

Tensor sum_all(Tape* tape, const Tensor& a) {
  Tensor result = make_output({1}, ArrayX::Constant(1, a.value().sum()), "sum");
  if (want_record(tape, {&a})) {
    result.set_tracked(true);
    tape->record([a, result]() mutable {
      if (!result.has_grad()) return;
      a.accumulate_grad(ArrayX::Constant(a.numel(), result.grad()[0]));
    });
  }
  return result;
}

Tensor reshape_copy(Tape* tape, const Tensor& a, Shape new_shape) {
  require(shape_numel(new_shape) == a.numel(), ErrorKind::invalid_argument,
          "reshape from " + shape_str(a.shape()) + " to " +
              shape_str(new_shape) + " changes the element count");
  Tensor result = make_output(std::move(new_shape), a.value(), "reshape");
  if (want_record(tape, {&a})) {
    result.set_tracked(true);
    tape->record([a, result]() mutable {
      if (!result.has_grad()) return;
      a.accumulate_grad(result.grad());
    });
  }
  return result;
}

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          ErrorKind::invalid_argument,
          "matmul shape mismatch: " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  ArrayX out(m * n);
  {
    ConstRowMatMap am(a.value().data(), m, k);
    ConstRowMatMap bm(b.value().data(), k, n);
    RowMatMap(out.data(), m, n).noalias() = am * bm;
  }
  Tensor result = make_output({m, n}, std::move(out), "matmul");
  if (want_record(tape, {&a, &b})) {
    result.set_tracked(true);
    tape->record([a, b, result, m, k, n]() mutable {
      if (!result.has_grad()) return;
      ConstRowMatMap gy(result.grad().data(), m, n);
      if (a.tracked()) {
        ArrayX ga(m * k);
        ConstRowMatMap bm(b.value().data(), k, n);
        RowMatMap(ga.data(), m, k).noalias() = gy * bm.transpose();
        a.accumulate_grad(ga);
      }
      if (b.tracked()) {
        ArrayX gb(k * n);
        ConstRowMatMap am(a.value().data(), m, k);
        RowMatMap(gb.data(), k, n).noalias() = am.transpose() * gy;
        b.accumulate_grad(gb);
      }
    });
  }
  return result;
}

Tensor linear(Tape* tape, const Tensor& x, const Tensor& weight,
              const Tensor* bias) {
  require(x.ndim() == 2 && weight.ndim() == 2 && x.dim(1) == weight.dim(1),
          ErrorKind::invalid_argument,
          "linear shape mismatch: " + shape_str(x.shape()) + " vs weight " +
              shape_str(weight.shape()));
  const Index batch = x.dim(0), features = x.dim(1), classes = weight.dim(0);
  if (bias != nullptr)
    require(bias->numel() == classes, ErrorKind::invalid_argument,
            "linear bias shape mismatch: " + shape_str(bias->shape()));
  ArrayX out(batch * classes);
  {
    ConstRowMatMap xm(x.value().data(), batch, features);
    ConstRowMatMap wm(weight.value().data(), classes, features);
    RowMatMap om(out.data(), batch, classes);
    om.noalias() = xm * wm.transpose();
    if (bias != nullptr)
      om.rowwise() +=
          Eigen::Map<const Eigen::RowVectorXd>(bias->value().data(), classes);
  }
  Tensor result = make_output({batch, classes}, std::move(out), "linear");
  Tensor bias_t = bias != nullptr ? *bias : Tensor();
  if (want_record(tape, {&x, &weight, bias})) {
    result.set_tracked(true);
    tape->record([x, weight, bias_t, result, batch, features, classes]() mutable {
      if (!result.has_grad()) return;
      ConstRowMatMap gy(result.grad().data(), batch, classes);
      if (x.tracked()) {
        ArrayX gx(batch * features);
        ConstRowMatMap wm(weight.value().data(), classes, features);
        RowMatMap(gx.data(), batch, features).noalias() = gy * wm;
        x.accumulate_grad(gx);
      }
      if (weight.tracked()) {
        ArrayX gw(classes * features);
        ConstRowMatMap xm(x.value().data(), batch, features);
        RowMatMap(gw.data(), classes, features).noalias() =
            gy.transpose() * xm;
        weight.accumulate_grad(gw);
      }
      if (bias_t.defined() && bias_t.tracked()) {
        ArrayX gb(classes);
        Eigen::Map<Eigen::RowVectorXd>(gb.data(), classes) = gy.colwise().sum();
        bias_t.accumulate_grad(gb);
      }
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

Tensor relu(Tape* tape, const Tensor& x) {
  Tensor result = make_output(x.shape(), x.value().max(0.0), "relu");
  if (want_record(tape, {&x})) {
    result.set_tracked(true);
    tape->record([x, result]() mutable {
      if (!result.has_grad()) return;
      x.accumulate_grad(result.grad() * (x.value() > 0.0).cast<Scalar>());
    });
  }
  return result;
}

Tensor prelu(Tape* tape, const Tensor& x, const Tensor& slope) {
  require(slope.numel() == 1, ErrorKind::invalid_argument,
          "prelu expects a scalar slope, got " + shape_str(slope.shape()));
  const Scalar a = slope.value()[0];
  ArrayX out = (x.value() > 0.0).select(x.value(), a * x.value());
  Tensor result = make_output(x.shape(), std::move(out), "prelu");
  if (want_record(tape, {&x, &slope})) {
    result.set_tracked(true);
    tape->record([x, slope, result]() mutable {
      if (!result.has_grad()) return;
      const ArrayX& gy = result.grad();
      const ArrayX positive = (x.value() > 0.0).cast<Scalar>();
      if (x.tracked()) {
        const Scalar a = slope.value()[0];
        x.accumulate_grad(gy * (positive + a * (1.0 - positive)));
      }
      if (slope.tracked()) {
        const Scalar gs = (gy * x.value() * (1.0 - positive)).sum();
        slope.accumulate_grad(ArrayX::Constant(1, gs));
      }
    });
  }
  return result;
}

namespace {

constexpr Scalar kInvSqrt2 = 0.7071067811865475244;
constexpr Scalar kInvSqrt2Pi = 0.3989422804014326779;

ArrayX gaussian_cdf(const ArrayX& x) {
  return 0.5 * (1.0 + (x * kInvSqrt2).erf());
}

}  // namespace

Tensor gelu(Tape* tape, const Tensor& x) {
  Tensor result =
      make_output(x.shape(), x.value() * gaussian_cdf(x.value()), "gelu");
  if (want_record(tape, {&x})) {
    result.set_tracked(true);
    tape->record([x, result]() mutable {
      if (!result.has_grad()) return;
      const ArrayX& xv = x.value();
      const ArrayX pdf = kInvSqrt2Pi * (-0.5 * xv.square()).exp();
      x.accumulate_grad(result.grad() * (gaussian_cdf(xv) + xv * pdf));
    });
  }
  return result;
}

Tensor silu(Tape* tape, const Tensor& x) {
  const ArrayX sig = 1.0 / (1.0 + (-x.value()).exp());
  Tensor result = make_output(x.shape(), x.value() * sig, "silu");
  if (want_record(tape, {&x})) {
    result.set_tracked(true);
    tape->record([x, result]() mutable {
      if (!result.has_grad()) return;
      const ArrayX sig = 1.0 / (1.0 + (-x.value()).exp());
      x.accumulate_grad(result.grad() * sig *
                        (1.0 + x.value() * (1.0 - sig)));
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

Index conv1d_output_length(Index length, Index kernel,
                           const Conv1dOptions& o) {
  return (length + 2 * o.padding - o.dilation * (kernel - 1) - 1) / o.stride +
         1;
}

namespace {

// Gathers x [B x C x L] into per-group patch matrices
// [C_g*k x B*L_out] (row-major), column index b*L_out + o.
void im2col_group(const Scalar* x, Index batch, Index channels, Index length,
                  Index group, Index group_channels, Index kernel,
                  const Conv1dOptions& o, Index out_length, Scalar* cols) {
  const Index n_cols = batch * out_length;
  for (Index c = 0; c < group_channels; ++c) {
    const Index channel = group * group_channels + c;
    for (Index j = 0; j < kernel; ++j) {
      Scalar* row = cols + (c * kernel + j) * n_cols;
      for (Index b = 0; b < batch; ++b) {
        const Scalar* xc = x + (b * channels + channel) * length;
        for (Index out = 0; out < out_length; ++out) {
          const Index pos = out * o.stride + j * o.dilation - o.padding;
          row[b * out_length + out] =
              (pos >= 0 && pos < length) ? xc[pos] : 0.0;
        }
      }
    }
  }
}

void col2im_group(const Scalar* cols, Index batch, Index channels,
                  Index length, Index group, Index group_channels,
                  Index kernel, const Conv1dOptions& o, Index out_length,
                  Scalar* gx) {
  const Index n_cols = batch * out_length;
  for (Index c = 0; c < group_channels; ++c) {
    const Index channel = group * group_channels + c;
    for (Index j = 0; j < kernel; ++j) {
      const Scalar* row = cols + (c * kernel + j) * n_cols;
      for (Index b = 0; b < batch; ++b) {
        Scalar* gxc = gx + (b * channels + channel) * length;
        for (Index out = 0; out < out_length; ++out) {
          const Index pos = out * o.stride + j * o.dilation - o.padding;
          if (pos >= 0 && pos < length) gxc[pos] += row[b * out_length + out];
        }
      }
    }
  }
}

}  // namespace

Tensor conv1d_raw(Tape* tape, const Tensor& x, const Tensor& kernel,
                  const Tensor* bias, const Conv1dOptions& options) {
  const SeqDims in = seq_dims(x, "conv1d");
  require(kernel.ndim() == 3, ErrorKind::invalid_argument,
          "conv1d kernel must be [C_out x C_in/groups x k], got " +
              shape_str(kernel.shape()));
  require(options.stride >= 1 && options.padding >= 0 &&
              options.dilation >= 1 && options.groups >= 1,
          ErrorKind::invalid_argument, "conv1d options out of range");
  const Index c_out = kernel.dim(0), c_in_g = kernel.dim(1),
              k = kernel.dim(2);
  require(in.channels == c_in_g * options.groups, ErrorKind::invalid_argument,
          "conv1d channel mismatch: input " + shape_str(x.shape()) +
              " vs kernel " + shape_str(kernel.shape()) + " with groups " +
              std::to_string(options.groups));
  require(c_out % options.groups == 0, ErrorKind::invalid_argument,
          "conv1d output channels not divisible by groups");
  const Index out_length = conv1d_output_length(in.length, k, options);
  require(out_length >= 1, ErrorKind::invalid_argument,
          "conv1d output would be empty: input length " +
              std::to_string(in.length) + ", kernel " + std::to_string(k));
  if (bias != nullptr)
    require(bias->numel() == c_out, ErrorKind::invalid_argument,
            "conv1d bias shape mismatch: " + shape_str(bias->shape()));

  const Index c_out_g = c_out / options.groups;
  const Index n_cols = in.batch * out_length;

  // One im2col + GEMM per group, shared across the batch.
  auto cols = std::make_shared<std::vector<ArrayX>>();
  cols->reserve(static_cast<size_t>(options.groups));
  ArrayX out(in.batch * c_out * out_length);
  MatX result_g(c_out_g, n_cols);
  for (Index g = 0; g < options.groups; ++g) {
    ArrayX cols_g(c_in_g * k * n_cols);
    im2col_group(x.value().data(), in.batch, in.channels, in.length, g, c_in_g,
                 k, options, out_length, cols_g.data());
    ConstRowMatMap wm(kernel.value().data() + g * c_out_g * c_in_g * k,
                      c_out_g, c_in_g * k);
    ConstRowMatMap cm(cols_g.data(), c_in_g * k, n_cols);
    RowMatX res = wm * cm;
    for (Index c = 0; c < c_out_g; ++c) {
      const Index channel = g * c_out_g + c;
      const Scalar b = bias != nullptr ? bias->value()[channel] : 0.0;
      for (Index bt = 0; bt < in.batch; ++bt)
        for (Index o = 0; o < out_length; ++o)
          out[(bt * c_out + channel) * out_length + o] =
              res(c, bt * out_length + o) + b;
    }
    cols->push_back(std::move(cols_g));
  }

  Shape out_shape = in.batched ? Shape{in.batch, c_out, out_length}
                               : Shape{c_out, out_length};
  Tensor result = make_output(std::move(out_shape), std::move(out), "conv1d");
  if (want_record(tape, {&x, &kernel, bias})) {
    result.set_tracked(true);
    Tensor bias_t = bias != nullptr ? *bias : Tensor();
    tape->record([x, kernel, bias_t, result, in, options, c_out, c_out_g,
                  c_in_g, k, out_length, n_cols, cols]() mutable {
      if (!result.has_grad()) return;
      const ArrayX& gy = result.grad();
      ArrayX gx;
      if (x.tracked()) gx = ArrayX::Zero(x.numel());
      ArrayX gw;
      if (kernel.tracked()) gw = ArrayX::Zero(kernel.numel());
      ArrayX gy_g(c_out_g * n_cols);
      for (Index g = 0; g < options.groups; ++g) {
        // Gather this group's slice of the output gradient.
        for (Index c = 0; c < c_out_g; ++c) {
          const Index channel = g * c_out_g + c;
          for (Index bt = 0; bt < in.batch; ++bt)
            for (Index o = 0; o < out_length; ++o)
              gy_g[c * n_cols + bt * out_length + o] =
                  gy[(bt * c_out + channel) * out_length + o];
        }
        ConstRowMatMap gym(gy_g.data(), c_out_g, n_cols);
        ConstRowMatMap cm((*cols)[g].data(), c_in_g * k, n_cols);
        if (kernel.tracked()) {
          RowMatMap(gw.data() + g * c_out_g * c_in_g * k, c_out_g, c_in_g * k)
              .noalias() = gym * cm.transpose();
        }
        if (x.tracked()) {
          ConstRowMatMap wm(kernel.value().data() + g * c_out_g * c_in_g * k,
                            c_out_g, c_in_g * k);
          ArrayX gcols(c_in_g * k * n_cols);
          RowMatMap(gcols.data(), c_in_g * k, n_cols).noalias() =
              wm.transpose() * gym;
          col2im_group(gcols.data(), in.batch, in.channels, in.length, g,
                       c_in_g, k, options, out_length, gx.data());
        }
      }
      if (x.tracked()) x.accumulate_grad(gx);
      if (kernel.tracked()) kernel.accumulate_grad(gw);
      if (bias_t.defined() && bias_t.tracked()) {
        ArrayX gb = ArrayX::Zero(c_out);
        for (Index bt = 0; bt < in.batch; ++bt)
          for (Index c = 0; c < c_out; ++c)
            for (Index o = 0; o < out_length; ++o)
              gb[c] += gy[(bt * c_out + c) * out_length + o];
        bias_t.accumulate_grad(gb);
      }
      cols->clear();
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Normalization / pooling / dropout
// ---------------------------------------------------------------------------

Tensor instance_norm_1d(Tape* tape, const Tensor& x, Scalar eps) {
  const SeqDims in = seq_dims(x, "instance_norm_1d");
  const Index rows = in.batch * in.channels;
  const Index length = in.length;
  require(length >= 1, ErrorKind::invalid_argument,
          "instance_norm_1d needs a non-empty length axis");

  ArrayX out(x.numel());
  auto inv_std = std::make_shared<ArrayX>(rows);
  const Scalar* xp = x.value().data();
  for (Index r = 0; r < rows; ++r) {
    Eigen::Map<const ArrayX> row(xp + r * length, length);
    const Scalar mean = row.mean();
    const Scalar var = (row - mean).square().mean();  // biased
    const Scalar is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    Eigen::Map<ArrayX>(out.data() + r * length, length) = (row - mean) * is;
  }
  Tensor result = make_output(x.shape(), std::move(out), "instance_norm_1d");
  if (want_record(tape, {&x})) {
    result.set_tracked(true);
    tape->record([x, result, inv_std, rows, length]() mutable {
      if (!result.has_grad()) return;
      ArrayX gx(x.numel());
      for (Index r = 0; r < rows; ++r) {
        Eigen::Map<const ArrayX> gy(result.grad().data() + r * length, length);
        Eigen::Map<const ArrayX> y(result.value().data() + r * length, length);
        const Scalar gy_mean = gy.mean();
        const Scalar gyy_mean = (gy * y).mean();
        Eigen::Map<ArrayX>(gx.data() + r * length, length) =
            (*inv_std)[r] * (gy - gy_mean - y * gyy_mean);
      }
      x.accumulate_grad(gx);
    });
  }
  return result;
}

Tensor adaptive_avg_pool_to_1(Tape* tape, const Tensor& x) {
  const SeqDims in = seq_dims(x, "adaptive_avg_pool_to_1");
  const Index rows = in.batch * in.channels;
  ArrayX out(rows);
  const Scalar* xp = x.value().data();
  for (Index r = 0; r < rows; ++r)
    out[r] = Eigen::Map<const ArrayX>(xp + r * in.length, in.length).mean();
  Shape out_shape =
      in.batched ? Shape{in.batch, in.channels} : Shape{in.channels};
  Tensor result = make_output(std::move(out_shape), std::move(out), "pool");
  if (want_record(tape, {&x})) {
    result.set_tracked(true);
    const Index length = in.length;
    tape->record([x, result, rows, length]() mutable {
      if (!result.has_grad()) return;
      ArrayX gx(x.numel());
      for (Index r = 0; r < rows; ++r)
        Eigen::Map<ArrayX>(gx.data() + r * length, length)
            .setConstant(result.grad()[r] / static_cast<Scalar>(length));
      x.accumulate_grad(gx);
    });
  }
  return result;
}

Tensor dropout(Tape* tape, const Tensor& x, Scalar p, bool train, Rng& rng) {
  require(p >= 0.0 && p < 1.0, ErrorKind::invalid_argument,
          "dropout probability must lie in [0, 1), got " + std::to_string(p));
  if (!train || p == 0.0) return x;
  const Scalar keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<ArrayX>(x.numel());
  for (Index i = 0; i < x.numel(); ++i)
    (*mask)[i] = rng.uniform() >= p ? keep_scale : 0.0;
  Tensor result = make_output(x.shape(), x.value() * (*mask), "dropout");
  if (want_record(tape, {&x})) {
    result.set_tracked(true);
    tape->record([x, result, mask]() mutable {
      if (!result.has_grad()) return;
      x.accumulate_grad(result.grad() * (*mask));
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Embedding lookup
// ---------------------------------------------------------------------------

Tensor embedding_lookup(Tape* tape, const Tensor& table,
                        const std::vector<int32_t>& indices, Index batch,
                        Index length, Index frozen_row) {
  require(table.ndim() == 2, ErrorKind::invalid_argument,
          "embedding table must be [V x d], got " + shape_str(table.shape()));
  require(static_cast<Index>(indices.size()) == batch * length,
          ErrorKind::invalid_argument,
          "index count does not match batch x length");
  const Index vocab = table.dim(0), dim = table.dim(1);
  for (int32_t idx : indices)
    require(idx >= 0 && idx < vocab, ErrorKind::invalid_argument,
            "token index " + std::to_string(idx) +
                " out of range for vocabulary of size " +
                std::to_string(vocab));

  ArrayX out(batch * dim * length);
  const Scalar* tp = table.value().data();
  for (Index b = 0; b < batch; ++b)
    for (Index l = 0; l < length; ++l) {
      const Scalar* row = tp + static_cast<Index>(indices[b * length + l]) * dim;
      for (Index r = 0; r < dim; ++r)
        out[(b * dim + r) * length + l] = row[r];
    }
  Tensor result =
      make_output({batch, dim, length}, std::move(out), "embedding_lookup");
  if (want_record(tape, {&table})) {
    result.set_tracked(true);
    tape->record([table, result, indices, batch, length, dim,
                  frozen_row]() mutable {
      if (!result.has_grad()) return;
      ArrayX gt = ArrayX::Zero(table.numel());
      const ArrayX& gy = result.grad();
      for (Index b = 0; b < batch; ++b)
        for (Index l = 0; l < length; ++l) {
          const Index idx = indices[b * length + l];
          if (idx == frozen_row) continue;
          for (Index r = 0; r < dim; ++r)
            gt[idx * dim + r] += gy[(b * dim + r) * length + l];
        }
      table.accumulate_grad(gt);
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Spline ops
// ---------------------------------------------------------------------------

Tensor basis_expand(Tape* tape, const Tensor& x, const SplineGrid& grid) {
  const SeqDims in = seq_dims(x, "basis_expand");
  const Index n_b = grid.n_basis();
  const bool track = want_record(tape, {&x});

  ArrayX out(x.numel() * n_b);
  auto deriv = std::make_shared<ArrayX>();
  if (track) deriv->resize(out.size());
  VecX work(2 * (grid.knots.size() - 1));
  VecX dbuf(n_b);
  const Scalar* xp = x.value().data();
  for (Index b = 0; b < in.batch; ++b)
    for (Index c = 0; c < in.channels; ++c)
      for (Index l = 0; l < in.length; ++l) {
        const Scalar v = xp[(b * in.channels + c) * in.length + l];
        // Output rows for channel c occupy block [c*n_b, (c+1)*n_b).
        const Index base =
            (b * in.channels * n_b + c * n_b) * in.length + l;
        VecX basis(n_b);
        bspline_basis_core<Scalar>(v, grid.knots.data(), grid.knots.size(),
                                   grid.spline_order, basis.data(),
                                   track ? dbuf.data() : nullptr, work.data());
        for (Index t = 0; t < n_b; ++t) {
          out[base + t * in.length] = basis[t];
          if (track) (*deriv)[base + t * in.length] = dbuf[t];
        }
      }

  Shape out_shape = in.batched ? Shape{in.batch, in.channels * n_b, in.length}
                               : Shape{in.channels * n_b, in.length};
  Tensor result =
      make_output(std::move(out_shape), std::move(out), "basis_expand");
  if (track) {
    result.set_tracked(true);
    tape->record([x, result, deriv, in, n_b]() mutable {
      if (!result.has_grad()) return;
      const ArrayX& gy = result.grad();
      ArrayX gx = ArrayX::Zero(x.numel());
      for (Index b = 0; b < in.batch; ++b)
        for (Index c = 0; c < in.channels; ++c)
          for (Index l = 0; l < in.length; ++l) {
            const Index base =
                (b * in.channels * n_b + c * n_b) * in.length + l;
            Scalar acc = 0.0;
            for (Index t = 0; t < n_b; ++t)
              acc += gy[base + t * in.length] * (*deriv)[base + t * in.length];
            gx[(b * in.channels + c) * in.length + l] = acc;
          }
      x.accumulate_grad(gx);
    });
  }
  return result;
}

Tensor kan_spline(Tape* tape, const Tensor& x, const Tensor& spline_weight,
                  const Tensor& spline_scaler, const SplineGrid& grid) {
  require(x.ndim() == 2, ErrorKind::invalid_argument,
          "kan_spline input must be [B x n_in], got " + shape_str(x.shape()));
  const Index batch = x.dim(0), n_in = x.dim(1);
  const Index n_b = grid.n_basis();
  require(spline_weight.ndim() == 3 && spline_weight.dim(1) == n_in &&
              spline_weight.dim(2) == n_b,
          ErrorKind::invalid_argument,
          "kan_spline weight shape mismatch: " +
              shape_str(spline_weight.shape()) + " for input " +
              shape_str(x.shape()));
  const Index n_out = spline_weight.dim(0);
  require(spline_scaler.ndim() == 2 && spline_scaler.dim(0) == n_out &&
              spline_scaler.dim(1) == n_in,
          ErrorKind::invalid_argument,
          "kan_spline scaler shape mismatch: " +
              shape_str(spline_scaler.shape()));

  const bool track = want_record(tape, {&x, &spline_weight, &spline_scaler});

  // Basis values (and derivatives when tracking) per [b, i].
  auto basis = std::make_shared<ArrayX>(batch * n_in * n_b);
  auto deriv = std::make_shared<ArrayX>();
  if (track && x.tracked()) deriv->resize(basis->size());
  {
    VecX work(2 * (grid.knots.size() - 1));
    VecX bbuf(n_b), dbuf(n_b);
    const Scalar* xp = x.value().data();
    for (Index r = 0; r < batch * n_in; ++r) {
      bspline_basis_core<Scalar>(
          xp[r], grid.knots.data(), grid.knots.size(), grid.spline_order,
          bbuf.data(), deriv->size() > 0 ? dbuf.data() : nullptr, work.data());
      for (Index t = 0; t < n_b; ++t) {
        (*basis)[r * n_b + t] = bbuf[t];
        if (deriv->size() > 0) (*deriv)[r * n_b + t] = dbuf[t];
      }
    }
  }

  // Effective weight [n_out x n_in*n_b] = scaler (broadcast) * weight.
  ArrayX w_eff(n_out * n_in * n_b);
  {
    const Scalar* sw = spline_weight.value().data();
    const Scalar* sc = spline_scaler.value().data();
    for (Index j = 0; j < n_out; ++j)
      for (Index i = 0; i < n_in; ++i)
        for (Index t = 0; t < n_b; ++t)
          w_eff[(j * n_in + i) * n_b + t] =
              sc[j * n_in + i] * sw[(j * n_in + i) * n_b + t];
  }

  ArrayX out(batch * n_out);
  {
    ConstRowMatMap bm(basis->data(), batch, n_in * n_b);
    ConstRowMatMap wm(w_eff.data(), n_out, n_in * n_b);
    RowMatMap(out.data(), batch, n_out).noalias() = bm * wm.transpose();
  }
  Tensor result = make_output({batch, n_out}, std::move(out), "kan_spline");
  if (track) {
    result.set_tracked(true);
    auto w_eff_keep = std::make_shared<ArrayX>(std::move(w_eff));
    tape->record([x, spline_weight, spline_scaler, result, basis, deriv,
                  w_eff_keep, batch, n_in, n_out, n_b]() mutable {
      if (!result.has_grad()) return;
      ConstRowMatMap gy(result.grad().data(), batch, n_out);
      if (spline_weight.tracked() || spline_scaler.tracked()) {
        ArrayX g_eff(n_out * n_in * n_b);
        ConstRowMatMap bm(basis->data(), batch, n_in * n_b);
        RowMatMap(g_eff.data(), n_out, n_in * n_b).noalias() =
            gy.transpose() * bm;
        const Scalar* sw = spline_weight.value().data();
        const Scalar* sc = spline_scaler.value().data();
        if (spline_weight.tracked()) {
          ArrayX gw(spline_weight.numel());
          for (Index j = 0; j < n_out; ++j)
            for (Index i = 0; i < n_in; ++i)
              for (Index t = 0; t < n_b; ++t)
                gw[(j * n_in + i) * n_b + t] =
                    g_eff[(j * n_in + i) * n_b + t] * sc[j * n_in + i];
          spline_weight.accumulate_grad(gw);
        }
        if (spline_scaler.tracked()) {
          ArrayX gs(spline_scaler.numel());
          for (Index j = 0; j < n_out; ++j)
            for (Index i = 0; i < n_in; ++i) {
              Scalar acc = 0.0;
              for (Index t = 0; t < n_b; ++t)
                acc += g_eff[(j * n_in + i) * n_b + t] *
                       sw[(j * n_in + i) * n_b + t];
              gs[j * n_in + i] = acc;
            }
          spline_scaler.accumulate_grad(gs);
        }
      }
      if (x.tracked()) {
        ArrayX g_basis(batch * n_in * n_b);
        ConstRowMatMap wm(w_eff_keep->data(), n_out, n_in * n_b);
        RowMatMap(g_basis.data(), batch, n_in * n_b).noalias() = gy * wm;
        ArrayX gx(x.numel());
        for (Index r = 0; r < batch * n_in; ++r) {
          Scalar acc = 0.0;
          for (Index t = 0; t < n_b; ++t)
            acc += g_basis[r * n_b + t] * (*deriv)[r * n_b + t];
          gx[r] = acc;
        }
        x.accumulate_grad(gx);
      }
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits,
                             const std::vector<int32_t>& labels) {
  Tensor z = logits;
  if (logits.ndim() == 1)
    z = reshape_copy(tape, logits, {1, logits.dim(0)});
  require(z.ndim() == 2, ErrorKind::invalid_argument,
          "softmax_cross_entropy expects [B x C] logits, got " +
              shape_str(logits.shape()));
  const Index batch = z.dim(0), classes = z.dim(1);
  require(static_cast<Index>(labels.size()) == batch,
          ErrorKind::invalid_argument,
          "label count " + std::to_string(labels.size()) +
              " does not match batch size " + std::to_string(batch));
  for (int32_t label : labels)
    require(label >= 0 && label < classes, ErrorKind::invalid_argument,
            "label " + std::to_string(label) + " out of range for " +
                std::to_string(classes) + " classes");

  auto softmax = std::make_shared<ArrayX>(batch * classes);
  Scalar loss = 0.0;
  const Scalar* zp = z.value().data();
  for (Index b = 0; b < batch; ++b) {
    Eigen::Map<const ArrayX> row(zp + b * classes, classes);
    const Scalar zmax = row.maxCoeff();
    const ArrayX shifted = row - zmax;
    const ArrayX expz = shifted.exp();
    const Scalar total = expz.sum();
    Eigen::Map<ArrayX>(softmax->data() + b * classes, classes) = expz / total;
    loss += std::log(total) - shifted[labels[b]];
  }
  loss /= static_cast<Scalar>(batch);
  Tensor result =
      make_output({1}, ArrayX::Constant(1, loss), "softmax_cross_entropy");
  if (want_record(tape, {&z})) {
    result.set_tracked(true);
    tape->record([z, result, softmax, labels, batch, classes]() mutable {
      if (!result.has_grad()) return;
      const Scalar g = result.grad()[0] / static_cast<Scalar>(batch);
      ArrayX gz = *softmax * g;
      for (Index b = 0; b < batch; ++b) gz[b * classes + labels[b]] -= g;
      z.accumulate_grad(gz);
    });
  }
  return result;
}

}  // namespace kaconv
