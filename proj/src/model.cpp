#include "sense/model.hpp"

#include <algorithm>
#include <cmath>

#include "sense/error.hpp"
#include "sense/rng.hpp"
#include "sense/textio.hpp"

namespace sense {

void ModelDims::validate() const {
  if (d_in < 1 || d_h < 1 || d_a < 1 || d_e < 1)
    throw ConfigError("model dimensions must all be >= 1");
}

ModelParams ModelParams::zeros(const ModelDims& dims) {
  dims.validate();
  const auto in = static_cast<std::size_t>(dims.d_in), h = static_cast<std::size_t>(dims.d_h),
             a = static_cast<std::size_t>(dims.d_a), e = static_cast<std::size_t>(dims.d_e);
  ModelParams p;
  p.dims = dims;
  p.W1 = Tensor(h, in);
  p.b1 = Tensor::vec(h);
  p.W2 = Tensor(h, h);
  p.b2 = Tensor::vec(h);
  p.Wa = Tensor(a, h);
  p.ba = Tensor::vec(a);
  p.v = Tensor::vec(a);
  p.P = Tensor(e, h);
  p.bp = Tensor::vec(e);
  return p;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  visit([&](const char*, ParamGroup, const Tensor& t) {
    for (double x : t.data) ok = ok && std::isfinite(x);
  });
  return ok;
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(dims);
  SplitMix64 g(derive_seed(seed, "init"));
  auto glorot = [&](Tensor& w) {
    const double r = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (auto& x : w.data) x = g.uniform(-r, r);
  };
  glorot(p.W1);
  glorot(p.W2);
  glorot(p.Wa);
  {
    const double r = std::sqrt(6.0 / static_cast<double>(dims.d_a + 1));
    for (auto& x : p.v.data) x = g.uniform(-r, r);
  }
  glorot(p.P);
  return p;
}

namespace {

// out = W x + b
void affine(const Tensor& w, const Tensor& b, std::span<const double> x, std::span<double> out) {
  for (std::size_t r = 0; r < w.rows; ++r) out[r] = dot(w.row(r), x) + b[r];
}

}  // namespace

Vector softmax(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax: empty input");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vector a(logits.size());
  double z = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) z += (a[t] = std::exp(logits[t] - m));
  for (auto& w : a) w /= z;
  return a;
}

ForwardResult forward(const ModelParams& params, const FrameSequence& frames) {
  return forward(params, frames.frames, frames.utt_id);
}

ForwardResult forward(const ModelParams& p, const Tensor& x, const std::string& utt_id) {
  const auto T = x.rows;
  const auto dh = static_cast<std::size_t>(p.dims.d_h), da = static_cast<std::size_t>(p.dims.d_a),
             de = static_cast<std::size_t>(p.dims.d_e);
  if (T == 0) throw ShapeError("forward: empty frame sequence " + utt_id);
  if (x.cols != static_cast<std::size_t>(p.dims.d_in))
    throw ShapeError("forward: frame dim " + std::to_string(x.cols) + " != model d_in " +
                     std::to_string(p.dims.d_in) + (utt_id.empty() ? "" : " for " + utt_id));

  ForwardResult f;
  f.hidden1 = Tensor(T, dh);
  f.hidden = Tensor(T, dh);
  f.attn_hidden = Tensor(T, da);
  f.attention.utt_id = utt_id;
  f.attention.logits.assign(T, 0.0);
  f.attention.weights.assign(T, 0.0);

  for (std::size_t t = 0; t < T; ++t) {
    auto h1 = f.hidden1.row(t);
    affine(p.W1, p.b1, x.row(t), h1);
    for (auto& z : h1) z = std::max(z, 0.0);
    auto h = f.hidden.row(t);
    affine(p.W2, p.b2, h1, h);
    for (auto& z : h) z = std::max(z, 0.0);
    auto u = f.attn_hidden.row(t);
    affine(p.Wa, p.ba, h, u);
    for (auto& z : u) z = std::tanh(z);
    f.attention.logits[t] = dot(p.v.data, u);
  }

  f.attention.weights = softmax(f.attention.logits);
  const auto& a = f.attention.weights;

  f.pooled.assign(dh, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const auto h = f.hidden.row(t);
    for (std::size_t j = 0; j < dh; ++j) f.pooled[j] += a[t] * h[j];
  }

  f.embedding.assign(de, 0.0);
  affine(p.P, p.bp, f.pooled, f.embedding);
  for (auto& s : f.embedding) s = std::tanh(s);
  return f;
}

ParamGrads backward(const ModelParams& p, const Tensor& x, const ForwardResult& f, std::span<const double> grad_s) {
  const auto T = x.rows;
  const auto din = static_cast<std::size_t>(p.dims.d_in), dh = static_cast<std::size_t>(p.dims.d_h),
             da = static_cast<std::size_t>(p.dims.d_a), de = static_cast<std::size_t>(p.dims.d_e);
  if (grad_s.size() != de) throw ShapeError("backward: grad_s has wrong dimension");
  if (x.cols != din || f.hidden.rows != T || f.hidden.cols != dh || f.hidden1.rows != T ||
      f.attn_hidden.rows != T || f.attn_hidden.cols != da || f.attention.weights.size() != T ||
      f.attention.logits.size() != T || f.pooled.size() != dh || f.embedding.size() != de)
    throw ShapeError("backward: cached forward values do not match the inputs");

  ParamGrads g = ModelParams::zeros(p.dims);

  // s = tanh(P c + bp)
  Vector gz(de);
  for (std::size_t i = 0; i < de; ++i) gz[i] = grad_s[i] * (1.0 - f.embedding[i] * f.embedding[i]);
  Vector gc(dh, 0.0);
  for (std::size_t i = 0; i < de; ++i) {
    g.bp[i] = gz[i];
    auto prow = g.P.row(i);
    const auto wrow = p.P.row(i);
    for (std::size_t j = 0; j < dh; ++j) {
      prow[j] = gz[i] * f.pooled[j];
      gc[j] += wrow[j] * gz[i];
    }
  }

  // c = sum_t a_t h_t, a = softmax(e)
  const auto& a = f.attention.weights;
  Vector ga(T);
  double mean_ga = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    ga[t] = dot(f.hidden.row(t), gc);
    mean_ga += a[t] * ga[t];
  }

  Tensor gh(T, dh);
  Vector gpre(da);
  Vector gz2(dh), gz1(dh);
  for (std::size_t t = 0; t < T; ++t) {
    const double ge = a[t] * (ga[t] - mean_ga);
    const auto h = f.hidden.row(t);
    const auto u = f.attn_hidden.row(t);
    auto ght = gh.row(t);
    for (std::size_t j = 0; j < dh; ++j) ght[j] = a[t] * gc[j];

    // e_t = v . tanh(Wa h + ba)
    for (std::size_t k = 0; k < da; ++k) {
      g.v[k] += ge * u[k];
      gpre[k] = ge * p.v[k] * (1.0 - u[k] * u[k]);
      g.ba[k] += gpre[k];
      auto wa_g = g.Wa.row(k);
      const auto wa = p.Wa.row(k);
      for (std::size_t j = 0; j < dh; ++j) {
        wa_g[j] += gpre[k] * h[j];
        ght[j] += wa[j] * gpre[k];
      }
    }

    // h = relu(W2 h1 + b2)
    const auto h1 = f.hidden1.row(t);
    for (std::size_t i = 0; i < dh; ++i) gz2[i] = h[i] > 0.0 ? ght[i] : 0.0;
    std::fill(gz1.begin(), gz1.end(), 0.0);
    for (std::size_t i = 0; i < dh; ++i) {
      if (gz2[i] == 0.0) continue;
      g.b2[i] += gz2[i];
      auto w2g = g.W2.row(i);
      const auto w2 = p.W2.row(i);
      for (std::size_t j = 0; j < dh; ++j) {
        w2g[j] += gz2[i] * h1[j];
        gz1[j] += w2[j] * gz2[i];
      }
    }

    // h1 = relu(W1 x + b1)
    const auto xt = x.row(t);
    for (std::size_t i = 0; i < dh; ++i) {
      if (!(h1[i] > 0.0) || gz1[i] == 0.0) continue;
      g.b1[i] += gz1[i];
      auto w1g = g.W1.row(i);
      for (std::size_t j = 0; j < din; ++j) w1g[j] += gz1[i] * xt[j];
    }
  }
  return g;
}

void accumulate(ParamGrads& dst, const ParamGrads& src, double scale) {
  if (!(dst.dims == src.dims)) throw ShapeError("accumulate: gradient layouts differ");
  std::vector<const Tensor*> from;
  src.visit([&](const char*, ParamGroup, const Tensor& t) { from.push_back(&t); });
  std::size_t i = 0;
  dst.visit([&](const char*, ParamGroup, Tensor& t) {
    const auto& s = *from[i++];
    for (std::size_t k = 0; k < t.size(); ++k) t[k] += scale * s[k];
  });
}

// ---------------------------------------------------------------------------

std::string model_to_string(const ModelParams& p) {
  std::string s = "SENSE-MODEL 1\n";
  s += "dims " + std::to_string(p.dims.d_in) + ' ' + std::to_string(p.dims.d_h) + ' ' + std::to_string(p.dims.d_a) +
       ' ' + std::to_string(p.dims.d_e) + '\n';
  p.visit([&](const char* name, ParamGroup, const Tensor& t) {
    if (t.is_vector) {
      s += '[' + std::string(name) + ' ' + std::to_string(t.rows) + "]\n";
      s += format_reals(t.data) + '\n';
    } else {
      s += '[' + std::string(name) + ' ' + std::to_string(t.rows) + ' ' + std::to_string(t.cols) + "]\n";
      for (std::size_t r = 0; r < t.rows; ++r) s += format_reals(t.row(r)) + '\n';
    }
  });
  return s;
}

ModelParams parse_model(const std::vector<std::string>& lines) {
  if (lines.size() < 2 || lines[0] != "SENSE-MODEL 1") throw IoError("not a SENSE-MODEL 1 file");
  const auto d = split_ws(lines[1]);
  if (d.size() != 5 || d[0] != "dims") throw IoError("bad model dims line");
  ModelDims dims{static_cast<int>(parse_int(d[1], "model dims")), static_cast<int>(parse_int(d[2], "model dims")),
                 static_cast<int>(parse_int(d[3], "model dims")), static_cast<int>(parse_int(d[4], "model dims"))};
  ModelParams p;
  try {
    p = ModelParams::zeros(dims);
  } catch (const ConfigError& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
  std::size_t ln = 2;
  p.visit([&](const char* name, ParamGroup, Tensor& t) {
    if (ln >= lines.size()) throw IoError(std::string("model file truncated before ") + name);
    const std::string expect = t.is_vector
                                   ? '[' + std::string(name) + ' ' + std::to_string(t.rows) + ']'
                                   : '[' + std::string(name) + ' ' + std::to_string(t.rows) + ' ' +
                                         std::to_string(t.cols) + ']';
    if (trim(lines[ln]) != expect) throw IoError("model file: expected section " + expect + ", got " + lines[ln]);
    ++ln;
    const std::size_t nrows = t.is_vector ? 1 : t.rows;
    const std::size_t width = t.is_vector ? t.rows : t.cols;
    for (std::size_t r = 0; r < nrows; ++r, ++ln) {
      if (ln >= lines.size()) throw IoError(std::string("model file truncated in ") + name);
      const auto vals = split_ws(lines[ln]);
      if (vals.size() != width) throw IoError(std::string("model file: wrong row width in ") + name);
      for (std::size_t c = 0; c < width; ++c) t.data[r * width + c] = parse_real(vals[c], name);
    }
  });
  if (!p.all_finite()) throw IoError("model file contains non-finite values");
  return p;
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_string(params));
}

ModelParams load_model(const std::filesystem::path& path) { return parse_model(read_lines(path)); }

}  // namespace sense
