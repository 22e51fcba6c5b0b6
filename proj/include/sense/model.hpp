#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sense/corpus.hpp"
#include "sense/tensor.hpp"

namespace sense {

struct ModelDims {
  int d_in = 16;
  int d_h = 32;
  int d_a = 32;  // attention inner dimension; conventionally d_h
  int d_e = 32;

  void validate() const;
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Parameter groups receiving separate learning rates.
enum class ParamGroup { kEncoder, kPooling };

/// Student weights: two-layer relu frame encoder (W1, W2), attentive pooling
/// (Wa, ba, v) and output projection (P, bp).
struct ModelParams {
  ModelDims dims;
  Tensor W1, b1, W2, b2;
  Tensor Wa, ba, v;
  Tensor P, bp;

  /// All-zero tensors shaped for `dims`.
  static ModelParams zeros(const ModelDims& dims);

  /// Calls f(name, group, tensor) for every parameter in serialization order.
  template <typename F>
  void visit(F&& f) {
    f("W1", ParamGroup::kEncoder, W1);
    f("b1", ParamGroup::kEncoder, b1);
    f("W2", ParamGroup::kEncoder, W2);
    f("b2", ParamGroup::kEncoder, b2);
    f("Wa", ParamGroup::kPooling, Wa);
    f("ba", ParamGroup::kPooling, ba);
    f("v", ParamGroup::kPooling, v);
    f("P", ParamGroup::kPooling, P);
    f("bp", ParamGroup::kPooling, bp);
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<ModelParams*>(this)->visit(
        [&](const char* name, ParamGroup g, Tensor& t) { f(name, g, static_cast<const Tensor&>(t)); });
  }

  bool all_finite() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gradients share the parameter layout.
using ParamGrads = ModelParams;

/// Glorot-uniform matrices, zero biases, v ~ U(-r, r) with r = sqrt(6/(d_a+1)).
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);

/// Pre-softmax logits and post-softmax weights, one per frame.
struct AttentionRecord {
  std::string utt_id;
  Vector logits;
  Vector weights;
};

/// Max-subtracted softmax.
Vector softmax(std::span<const double> logits);

/// Everything forward computes; backward consumes the cached activations.
struct ForwardResult {
  Vector embedding;      // s, d_e
  Tensor hidden;         // H, T x d_h
  AttentionRecord attention;
  Tensor hidden1;        // relu(W1 x + b1), T x d_h
  Tensor attn_hidden;    // tanh(Wa h + ba), T x d_a
  Vector pooled;         // c, d_h
};

ForwardResult forward(const ModelParams& params, const FrameSequence& frames);
ForwardResult forward(const ModelParams& params, const Tensor& frames, const std::string& utt_id = {});

/// Exact gradient of grad_s . s with respect to every parameter.
ParamGrads backward(const ModelParams& params, const Tensor& frames, const ForwardResult& fwd,
                    std::span<const double> grad_s);

/// Adds `scale * src` into dst (same layout).
void accumulate(ParamGrads& dst, const ParamGrads& src, double scale = 1.0);

std::string model_to_string(const ModelParams& params);
ModelParams parse_model(const std::vector<std::string>& lines);
void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace sense
