#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curveweave/rng.hpp"

namespace curveweave {

enum class Act : std::uint8_t { identity, relu, tanh_fn };

inline const char* act_name(Act a) {
    switch (a) {
        case Act::identity: return "identity";
        case Act::relu: return "relu";
        case Act::tanh_fn: return "tanh";
    }
    return "?";
}

inline double act_apply(Act a, double x) {
    switch (a) {
        case Act::identity: return x;
        case Act::relu: return x > 0.0 ? x : 0.0;
        case Act::tanh_fn: return std::tanh(x);
    }
    return x;
}

// Derivative expressed through the activation output, so backward never
// needs the pre-activation values.
inline double act_grad_from_output(Act a, double out) {
    switch (a) {
        case Act::identity: return 1.0;
        case Act::relu: return out > 0.0 ? 1.0 : 0.0;
        case Act::tanh_fn: return 1.0 - out * out;
    }
    return 1.0;
}

// Layers operate on a stack of tensors, which lets a flat layer list express
// multi-branch networks: duplicate/swap_top shuffle the stack, split/concat
// move between one two-channel-group tensor and two tensors.
enum class LayerKind : std::uint8_t {
    permute,
    inverse_permute,
    sparse1,
    sparse3,
    conv1d,
    conv1d_transpose,
    conv2d,
    conv2d_transpose,
    fully_connected,
    activation,
    split_channels,
    concat_channels,
    sum_channels,
    reshape,
    duplicate,
    swap_top,
    replicate_channels,
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::permute: return "permute";
        case LayerKind::inverse_permute: return "inverse_permute";
        case LayerKind::sparse1: return "sparse1";
        case LayerKind::sparse3: return "sparse3";
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::conv1d_transpose: return "conv1d_transpose";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::conv2d_transpose: return "conv2d_transpose";
        case LayerKind::fully_connected: return "fully_connected";
        case LayerKind::activation: return "activation";
        case LayerKind::split_channels: return "split_channels";
        case LayerKind::concat_channels: return "concat_channels";
        case LayerKind::sum_channels: return "sum_channels";
        case LayerKind::reshape: return "reshape";
        case LayerKind::duplicate: return "duplicate";
        case LayerKind::swap_top: return "swap_top";
        case LayerKind::replicate_channels: return "replicate_channels";
    }
    return "?";
}

// Channel-major tensor: value of channel c at position i sits at v[c*length+i].
struct Tensor {
    std::size_t channels = 0, length = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::size_t c, std::size_t l) : channels(c), length(l), v(c * l, 0.0) {}

    double& at(std::size_t c, std::size_t i) { return v[c * length + i]; }
    double at(std::size_t c, std::size_t i) const { return v[c * length + i]; }
    std::size_t size() const { return v.size(); }
};

// Construction-time fields are the user-facing ones; in_*/out_* dimensions are
// resolved when the model is built. height/width describe planar tensors for
// the 2d convolutions (0 when the tensor has no planar meaning).
struct LayerSpec {
    LayerKind kind = LayerKind::activation;
    Act act = Act::identity;
    bool has_bias = false; // sparse*, activation

    std::size_t out_channels = 0;                        // conv*, replicate target
    std::size_t kernel = 0, stride = 1, padding = 0;     // conv*
    std::size_t output_padding = 0;                      // conv*_transpose
    std::size_t out_features = 0;                        // fully_connected
    std::size_t ordering = 0;                            // permute layers
    std::size_t split_at = 0;                            // split_channels
    std::size_t replicas = 0;                            // replicate_channels
    std::size_t reshape_channels = 0, reshape_length = 0;
    std::size_t reshape_height = 0, reshape_width = 0;   // optional planar shape

    // resolved
    std::size_t in_channels = 0, in_length = 0;
    std::size_t out_length = 0;
    std::size_t in_height = 0, in_width = 0;
    std::size_t out_height = 0, out_width = 0;
    std::size_t in_features = 0; // fully_connected
};

namespace nn_detail {

struct ShapeInfo {
    std::size_t channels = 0, length = 0;
    std::size_t height = 0, width = 0; // 0 when not planar
};

inline std::size_t conv_out_len(std::size_t l, std::size_t k, std::size_t s, std::size_t p) {
    if (l + 2 * p < k) return 0;
    return (l + 2 * p - k) / s + 1;
}

inline std::size_t tconv_out_len(std::size_t l, std::size_t k, std::size_t s, std::size_t p,
                                 std::size_t op) {
    std::size_t grown = (l - 1) * s + k + op;
    if (grown < 2 * p) return 0;
    return grown - 2 * p;
}

} // namespace nn_detail

struct TapeEntry {
    std::vector<Tensor> inputs;  // in pop order (top of stack first)
    std::vector<Tensor> outputs; // in push order (last one ends on top)
};

struct Tape {
    std::vector<TapeEntry> entries;
};

// Autoencoder assembled from a flat layer list interpreted by a stack
// machine. Shapes are resolved once at construction; forward/backward are
// const so multiple workers can evaluate the same model concurrently.
class Model {
  public:
    Model() = default;

    Model(std::vector<LayerSpec> layers, std::size_t in_channels, std::size_t in_length,
          std::vector<std::vector<std::uint32_t>> orderings, std::string preset_name,
          std::size_t latent, std::size_t in_height = 0, std::size_t in_width = 0,
          std::ptrdiff_t bottleneck = -1)
        : layers_(std::move(layers)),
          orderings_(std::move(orderings)),
          preset_name_(std::move(preset_name)),
          latent_(latent),
          in_channels_(in_channels),
          in_length_(in_length),
          in_height_(in_height),
          in_width_(in_width),
          bottleneck_(bottleneck) {
        if (layers_.empty()) throw std::invalid_argument("model has no layers");
        for (std::size_t o = 0; o < orderings_.size(); ++o) {
            const auto& ord = orderings_[o];
            std::vector<std::uint8_t> seen(ord.size(), 0);
            for (std::uint32_t vtx : ord) {
                if (vtx >= ord.size() || seen[vtx])
                    throw std::invalid_argument("model ordering " + std::to_string(o) +
                                                " is not a permutation");
                seen[vtx] = 1;
            }
        }
        resolve_shapes();
        params_.assign(param_count_, 0.0);
        if (bottleneck_ < 0)
            find_bottleneck();
        else if (static_cast<std::size_t>(bottleneck_) >= layers_.size() ||
                 layers_[static_cast<std::size_t>(bottleneck_)].kind !=
                     LayerKind::fully_connected ||
                 layers_[static_cast<std::size_t>(bottleneck_)].out_features != latent_)
            throw std::invalid_argument("bottleneck index does not name a fully connected layer "
                                        "with the latent width");
    }

    const std::vector<LayerSpec>& layers() const { return layers_; }
    const std::vector<std::vector<std::uint32_t>>& orderings() const { return orderings_; }
    const std::string& preset_name() const { return preset_name_; }
    std::size_t latent() const { return latent_; }
    std::size_t in_channels() const { return in_channels_; }
    std::size_t in_length() const { return in_length_; }
    std::size_t in_height() const { return in_height_; }
    std::size_t in_width() const { return in_width_; }
    std::size_t param_count() const { return param_count_; }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t layer_param_offset(std::size_t l) const { return offsets_[l]; }
    std::size_t layer_param_count(std::size_t l) const { return offsets_[l + 1] - offsets_[l]; }

    // Xavier-uniform for convolution and fully connected weights, zero for
    // every bias, and the identity map for the sparse layers (center weight
    // one, neighbor weights zero). Only weight draws consume randomness.
    void init_params(Rng& rng) {
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const LayerSpec& s = layers_[l];
            double* p = params_.data() + offsets_[l];
            std::size_t count = offsets_[l + 1] - offsets_[l];
            switch (s.kind) {
                case LayerKind::conv1d:
                case LayerKind::conv1d_transpose: {
                    std::size_t nw = s.in_channels * s.out_channels * s.kernel;
                    double bound =
                        std::sqrt(6.0 / static_cast<double>((s.in_channels + s.out_channels) *
                                                            s.kernel));
                    for (std::size_t i = 0; i < nw; ++i) p[i] = rng.uniform(-bound, bound);
                    for (std::size_t i = nw; i < count; ++i) p[i] = 0.0;
                    break;
                }
                case LayerKind::conv2d:
                case LayerKind::conv2d_transpose: {
                    std::size_t nw = s.in_channels * s.out_channels * s.kernel * s.kernel;
                    double bound =
                        std::sqrt(6.0 / static_cast<double>((s.in_channels + s.out_channels) *
                                                            s.kernel * s.kernel));
                    for (std::size_t i = 0; i < nw; ++i) p[i] = rng.uniform(-bound, bound);
                    for (std::size_t i = nw; i < count; ++i) p[i] = 0.0;
                    break;
                }
                case LayerKind::fully_connected: {
                    std::size_t nw = s.in_features * s.out_features;
                    double bound = std::sqrt(
                        6.0 / static_cast<double>(s.in_features + s.out_features));
                    for (std::size_t i = 0; i < nw; ++i) p[i] = rng.uniform(-bound, bound);
                    for (std::size_t i = nw; i < count; ++i) p[i] = 0.0;
                    break;
                }
                case LayerKind::sparse1:
                case LayerKind::sparse3: {
                    std::size_t n = s.in_channels * s.in_length;
                    for (std::size_t i = 0; i < n; ++i) p[i] = 1.0; // center weight
                    for (std::size_t i = n; i < count; ++i) p[i] = 0.0;
                    break;
                }
                default:
                    for (std::size_t i = 0; i < count; ++i) p[i] = 0.0;
            }
        }
    }

    Tensor forward(const Tensor& x, Tape* tape = nullptr) const {
        check_input(x);
        std::vector<Tensor> stack;
        stack.push_back(x);
        if (tape) {
            tape->entries.clear();
            tape->entries.resize(layers_.size());
        }
        for (std::size_t l = 0; l < layers_.size(); ++l)
            apply_layer(l, stack, tape ? &tape->entries[l] : nullptr);
        if (stack.size() != 1)
            throw std::logic_error("model left " + std::to_string(stack.size()) +
                                   " tensors on the stack");
        return std::move(stack.back());
    }

    // Accumulates parameter gradients into grads (size param_count()).
    void backward(const Tape& tape, const Tensor& grad_out, std::vector<double>& grads) const {
        if (grads.size() != param_count_)
            throw std::invalid_argument("backward: gradient buffer has wrong size");
        std::vector<Tensor> gs;
        gs.push_back(grad_out);
        for (std::size_t l = layers_.size(); l-- > 0;)
            backward_layer(l, tape.entries[l], gs, grads);
        if (gs.size() != 1)
            throw std::logic_error("backward left " + std::to_string(gs.size()) +
                                   " gradients on the stack");
    }

    // Gradient with respect to the model input (used by the derivative checks).
    Tensor input_gradient(const Tape& tape, const Tensor& grad_out) const {
        std::vector<double> scratch(param_count_, 0.0);
        std::vector<Tensor> gs;
        gs.push_back(grad_out);
        for (std::size_t l = layers_.size(); l-- > 0;)
            backward_layer(l, tape.entries[l], gs, scratch);
        return std::move(gs.back());
    }

    bool has_bottleneck() const { return bottleneck_ >= 0; }
    std::ptrdiff_t bottleneck_layer() const { return bottleneck_; }

    // Latent code: everything up to and including the narrowest fully
    // connected layer whose output is the latent vector.
    Tensor encode(const Tensor& x) const {
        require_bottleneck();
        check_input(x);
        std::vector<Tensor> stack;
        stack.push_back(x);
        for (std::size_t l = 0; l <= static_cast<std::size_t>(bottleneck_); ++l)
            apply_layer(l, stack, nullptr);
        if (stack.size() != 1)
            throw std::logic_error("encoder left more than one tensor on the stack");
        return std::move(stack.back());
    }

    Tensor decode(const Tensor& code) const {
        require_bottleneck();
        if (code.channels != 1 || code.length != latent_)
            throw std::invalid_argument("decode: expected a (1, " + std::to_string(latent_) +
                                        ") code, got (" + std::to_string(code.channels) + ", " +
                                        std::to_string(code.length) + ")");
        std::vector<Tensor> stack;
        stack.push_back(code);
        for (std::size_t l = static_cast<std::size_t>(bottleneck_) + 1; l < layers_.size(); ++l)
            apply_layer(l, stack, nullptr);
        if (stack.size() != 1)
            throw std::logic_error("decoder left more than one tensor on the stack");
        return std::move(stack.back());
    }

  private:
    std::vector<LayerSpec> layers_;
    std::vector<std::vector<std::uint32_t>> orderings_;
    std::string preset_name_;
    std::size_t latent_ = 0;
    std::size_t in_channels_ = 0, in_length_ = 0, in_height_ = 0, in_width_ = 0;
    std::vector<double> params_;
    std::vector<std::size_t> offsets_; // layers_.size() + 1 entries
    std::size_t param_count_ = 0;
    std::ptrdiff_t bottleneck_ = -1;

    void check_input(const Tensor& x) const {
        if (x.channels != in_channels_ || x.length != in_length_)
            throw std::invalid_argument(
                "model input must be (" + std::to_string(in_channels_) + ", " +
                std::to_string(in_length_) + "), got (" + std::to_string(x.channels) + ", " +
                std::to_string(x.length) + ")");
    }

    void require_bottleneck() const {
        if (bottleneck_ < 0)
            throw std::logic_error(
                "model has no fully connected layer producing the latent width; "
                "encode/decode are unavailable");
    }

    void find_bottleneck() {
        for (std::size_t l = 0; l < layers_.size(); ++l)
            if (layers_[l].kind == LayerKind::fully_connected &&
                layers_[l].out_features == latent_ && latent_ > 0) {
                bottleneck_ = static_cast<std::ptrdiff_t>(l);
                return;
            }
    }

    [[noreturn]] void fail(std::size_t l, const std::string& msg) const {
        throw std::invalid_argument("layer " + std::to_string(l) + " (" +
                                    layer_kind_name(layers_[l].kind) + "): " + msg);
    }

    static std::string shape_str(const nn_detail::ShapeInfo& s) {
        return "(" + std::to_string(s.channels) + ", " + std::to_string(s.length) + ")";
    }

    std::size_t spec_param_count(const LayerSpec& s) const {
        switch (s.kind) {
            case LayerKind::conv1d:
            case LayerKind::conv1d_transpose:
                return s.in_channels * s.out_channels * s.kernel + s.out_channels;
            case LayerKind::conv2d:
            case LayerKind::conv2d_transpose:
                return s.in_channels * s.out_channels * s.kernel * s.kernel + s.out_channels;
            case LayerKind::fully_connected:
                return s.in_features * s.out_features + s.out_features;
            case LayerKind::sparse1:
                return s.in_channels * s.in_length * (s.has_bias ? 2u : 1u);
            case LayerKind::sparse3:
                return s.in_channels * s.in_length * (s.has_bias ? 4u : 3u);
            case LayerKind::activation:
                return s.has_bias ? s.in_channels * s.in_length : 0u;
            default:
                return 0;
        }
    }

    void resolve_shapes() {
        using nn_detail::ShapeInfo;
        std::vector<ShapeInfo> st;
        st.push_back({in_channels_, in_length_, in_height_, in_width_});
        offsets_.assign(layers_.size() + 1, 0);
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            LayerSpec& s = layers_[l];
            auto need = [&](std::size_t n) {
                if (st.size() < n)
                    fail(l, "needs " + std::to_string(n) + " stack tensors, have " +
                                std::to_string(st.size()));
            };
            switch (s.kind) {
                case LayerKind::permute:
                case LayerKind::inverse_permute: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (s.ordering >= orderings_.size())
                        fail(l, "ordering index " + std::to_string(s.ordering) +
                                    " out of range (model has " +
                                    std::to_string(orderings_.size()) + " orderings)");
                    if (orderings_[s.ordering].size() != in.length)
                        fail(l, "ordering covers " +
                                    std::to_string(orderings_[s.ordering].size()) +
                                    " positions, tensor length is " + std::to_string(in.length));
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.out_channels = in.channels;
                    s.out_length = in.length;
                    st.back() = {in.channels, in.length, 0, 0};
                    break;
                }
                case LayerKind::sparse1:
                case LayerKind::sparse3:
                case LayerKind::activation: {
                    need(1);
                    ShapeInfo in = st.back();
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.out_channels = in.channels;
                    s.out_length = in.length;
                    s.in_height = in.height;
                    s.in_width = in.width;
                    s.out_height = in.height;
                    s.out_width = in.width;
                    break;
                }
                case LayerKind::conv1d: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (s.kernel == 0 || s.stride == 0) fail(l, "kernel and stride must be positive");
                    if (s.out_channels == 0) fail(l, "out_channels must be positive");
                    std::size_t out_len =
                        nn_detail::conv_out_len(in.length, s.kernel, s.stride, s.padding);
                    if (out_len == 0)
                        fail(l, "input length " + std::to_string(in.length) +
                                    " too short for kernel " + std::to_string(s.kernel));
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.out_length = out_len;
                    st.back() = {s.out_channels, out_len, 0, 0};
                    break;
                }
                case LayerKind::conv1d_transpose: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (s.kernel == 0 || s.stride == 0) fail(l, "kernel and stride must be positive");
                    if (s.out_channels == 0) fail(l, "out_channels must be positive");
                    if (s.output_padding >= s.stride)
                        fail(l, "output_padding must be smaller than stride");
                    std::size_t out_len = nn_detail::tconv_out_len(in.length, s.kernel, s.stride,
                                                                   s.padding, s.output_padding);
                    if (out_len == 0) fail(l, "padding removes the whole output");
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.out_length = out_len;
                    st.back() = {s.out_channels, out_len, 0, 0};
                    break;
                }
                case LayerKind::conv2d: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (in.height == 0 || in.width == 0 || in.height * in.width != in.length)
                        fail(l, "input tensor has no planar shape; reshape with explicit "
                                "height/width first");
                    if (s.kernel == 0 || s.stride == 0) fail(l, "kernel and stride must be positive");
                    std::size_t oh = nn_detail::conv_out_len(in.height, s.kernel, s.stride, s.padding);
                    std::size_t ow = nn_detail::conv_out_len(in.width, s.kernel, s.stride, s.padding);
                    if (oh == 0 || ow == 0) fail(l, "input plane too small for kernel");
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.in_height = in.height;
                    s.in_width = in.width;
                    s.out_height = oh;
                    s.out_width = ow;
                    s.out_length = oh * ow;
                    st.back() = {s.out_channels, s.out_length, oh, ow};
                    break;
                }
                case LayerKind::conv2d_transpose: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (in.height == 0 || in.width == 0 || in.height * in.width != in.length)
                        fail(l, "input tensor has no planar shape; reshape with explicit "
                                "height/width first");
                    if (s.kernel == 0 || s.stride == 0) fail(l, "kernel and stride must be positive");
                    if (s.output_padding >= s.stride)
                        fail(l, "output_padding must be smaller than stride");
                    std::size_t oh = nn_detail::tconv_out_len(in.height, s.kernel, s.stride,
                                                              s.padding, s.output_padding);
                    std::size_t ow = nn_detail::tconv_out_len(in.width, s.kernel, s.stride,
                                                              s.padding, s.output_padding);
                    if (oh == 0 || ow == 0) fail(l, "padding removes the whole output plane");
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.in_height = in.height;
                    s.in_width = in.width;
                    s.out_height = oh;
                    s.out_width = ow;
                    s.out_length = oh * ow;
                    st.back() = {s.out_channels, s.out_length, oh, ow};
                    break;
                }
                case LayerKind::fully_connected: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (s.out_features == 0) fail(l, "out_features must be positive");
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.in_features = in.channels * in.length;
                    s.out_channels = 1;
                    s.out_length = s.out_features;
                    st.back() = {1, s.out_features, 0, 0};
                    break;
                }
                case LayerKind::split_channels: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (s.split_at == 0 || s.split_at >= in.channels)
                        fail(l, "split_at must lie strictly inside the " +
                                    std::to_string(in.channels) + " channels");
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.out_length = in.length;
                    st.back() = {s.split_at, in.length, in.height, in.width};
                    st.push_back({in.channels - s.split_at, in.length, in.height, in.width});
                    break;
                }
                case LayerKind::concat_channels: {
                    need(2);
                    ShapeInfo b = st.back();
                    st.pop_back();
                    ShapeInfo a = st.back();
                    if (a.length != b.length)
                        fail(l, "cannot concatenate lengths " + std::to_string(a.length) +
                                    " and " + std::to_string(b.length));
                    s.in_length = a.length;
                    s.out_channels = a.channels + b.channels;
                    s.out_length = a.length;
                    s.split_at = a.channels; // remembered for backward
                    std::size_t h = (a.height == b.height) ? a.height : 0;
                    std::size_t w = (a.width == b.width) ? a.width : 0;
                    st.back() = {s.out_channels, a.length, h, w};
                    break;
                }
                case LayerKind::sum_channels: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (in.channels % 2 != 0)
                        fail(l, "needs an even channel count, got " +
                                    std::to_string(in.channels));
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.out_channels = in.channels / 2;
                    s.out_length = in.length;
                    st.back() = {s.out_channels, in.length, in.height, in.width};
                    break;
                }
                case LayerKind::reshape: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (s.reshape_channels * s.reshape_length != in.channels * in.length)
                        fail(l, "cannot reshape " + shape_str(in) + " into (" +
                                    std::to_string(s.reshape_channels) + ", " +
                                    std::to_string(s.reshape_length) + ")");
                    if (s.reshape_height * s.reshape_width != 0 &&
                        s.reshape_height * s.reshape_width != s.reshape_length)
                        fail(l, "planar shape does not match the reshaped length");
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.out_channels = s.reshape_channels;
                    s.out_length = s.reshape_length;
                    st.back() = {s.reshape_channels, s.reshape_length, s.reshape_height,
                                 s.reshape_width};
                    break;
                }
                case LayerKind::duplicate: {
                    need(1);
                    ShapeInfo in = st.back();
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.out_channels = in.channels;
                    s.out_length = in.length;
                    st.push_back(in);
                    break;
                }
                case LayerKind::swap_top: {
                    need(2);
                    std::swap(st[st.size() - 1], st[st.size() - 2]);
                    break;
                }
                case LayerKind::replicate_channels: {
                    need(1);
                    ShapeInfo in = st.back();
                    if (s.replicas == 0) fail(l, "replicas must be positive");
                    s.in_channels = in.channels;
                    s.in_length = in.length;
                    s.out_channels = in.channels * s.replicas;
                    s.out_length = in.length;
                    st.back() = {s.out_channels, in.length, in.height, in.width};
                    break;
                }
            }
            offsets_[l + 1] = offsets_[l] + spec_param_count(s);
        }
        if (st.size() != 1)
            throw std::invalid_argument("layer list leaves " + std::to_string(st.size()) +
                                        " tensors on the stack; expected exactly one output");
        param_count_ = offsets_.back();
    }

    void apply_layer(std::size_t l, std::vector<Tensor>& stack, TapeEntry* entry) const {
        const LayerSpec& s = layers_[l];
        const double* p = params_.data() + offsets_[l];
        auto pop = [&]() {
            Tensor t = std::move(stack.back());
            stack.pop_back();
            if (entry) entry->inputs.push_back(t);
            return t;
        };
        auto push = [&](Tensor t) {
            if (entry) entry->outputs.push_back(t);
            stack.push_back(std::move(t));
        };
        switch (s.kind) {
            case LayerKind::permute: {
                Tensor x = pop();
                const auto& ord = orderings_[s.ordering];
                Tensor out(x.channels, x.length);
                for (std::size_t c = 0; c < x.channels; ++c)
                    for (std::size_t i = 0; i < x.length; ++i)
                        out.at(c, i) = x.at(c, ord[i]);
                push(std::move(out));
                break;
            }
            case LayerKind::inverse_permute: {
                Tensor x = pop();
                const auto& ord = orderings_[s.ordering];
                Tensor out(x.channels, x.length);
                for (std::size_t c = 0; c < x.channels; ++c)
                    for (std::size_t i = 0; i < x.length; ++i)
                        out.at(c, ord[i]) = x.at(c, i);
                push(std::move(out));
                break;
            }
            case LayerKind::sparse1: {
                Tensor x = pop();
                const std::size_t n = x.size();
                const double* w = p;
                const double* b = s.has_bias ? p + n : nullptr;
                Tensor out(x.channels, x.length);
                for (std::size_t i = 0; i < n; ++i)
                    out.v[i] = act_apply(s.act, w[i] * x.v[i] + (b ? b[i] : 0.0));
                push(std::move(out));
                break;
            }
            case LayerKind::sparse3: {
                Tensor x = pop();
                const std::size_t L = x.length, n = x.size();
                const double* w = p;
                const double* wp = p + n;
                const double* wm = p + 2 * n;
                const double* b = s.has_bias ? p + 3 * n : nullptr;
                Tensor out(x.channels, x.length);
                for (std::size_t c = 0; c < x.channels; ++c)
                    for (std::size_t i = 0; i < L; ++i) {
                        std::size_t idx = c * L + i;
                        double acc = w[idx] * x.v[idx];
                        if (i + 1 < L) acc += wp[idx] * x.v[idx + 1];
                        if (i > 0) acc += wm[idx] * x.v[idx - 1];
                        if (b) acc += b[idx];
                        out.v[idx] = act_apply(s.act, acc);
                    }
                push(std::move(out));
                break;
            }
            case LayerKind::conv1d: {
                Tensor x = pop();
                const std::size_t Ci = s.in_channels, Co = s.out_channels;
                const std::size_t k = s.kernel, st = s.stride, pd = s.padding;
                const double* w = p;
                const double* b = p + Co * Ci * k;
                Tensor out(Co, s.out_length);
                for (std::size_t co = 0; co < Co; ++co)
                    for (std::size_t j = 0; j < s.out_length; ++j) {
                        double acc = b[co];
                        for (std::size_t ci = 0; ci < Ci; ++ci) {
                            const double* wrow = w + (co * Ci + ci) * k;
                            const double* xrow = x.v.data() + ci * s.in_length;
                            for (std::size_t t = 0; t < k; ++t) {
                                std::size_t pos = j * st + t; // index into padded input
                                if (pos < pd || pos - pd >= s.in_length) continue;
                                acc += wrow[t] * xrow[pos - pd];
                            }
                        }
                        out.at(co, j) = act_apply(s.act, acc);
                    }
                push(std::move(out));
                break;
            }
            case LayerKind::conv1d_transpose: {
                Tensor x = pop();
                const std::size_t Ci = s.in_channels, Co = s.out_channels;
                const std::size_t k = s.kernel, st = s.stride, pd = s.padding;
                const double* w = p;
                const double* b = p + Ci * Co * k;
                Tensor out(Co, s.out_length);
                for (std::size_t co = 0; co < Co; ++co)
                    for (std::size_t o = 0; o < s.out_length; ++o) out.at(co, o) = b[co];
                for (std::size_t ci = 0; ci < Ci; ++ci)
                    for (std::size_t j = 0; j < s.in_length; ++j) {
                        double xv = x.at(ci, j);
                        if (xv == 0.0) continue;
                        for (std::size_t co = 0; co < Co; ++co) {
                            const double* wrow = w + (ci * Co + co) * k;
                            double* orow = out.v.data() + co * s.out_length;
                            for (std::size_t t = 0; t < k; ++t) {
                                std::size_t pos = j * st + t;
                                if (pos < pd || pos - pd >= s.out_length) continue;
                                orow[pos - pd] += wrow[t] * xv;
                            }
                        }
                    }
                if (s.act != Act::identity)
                    for (double& v : out.v) v = act_apply(s.act, v);
                push(std::move(out));
                break;
            }
            case LayerKind::conv2d: {
                Tensor x = pop();
                const std::size_t Ci = s.in_channels, Co = s.out_channels;
                const std::size_t k = s.kernel, st = s.stride, pd = s.padding;
                const std::size_t Hi = s.in_height, Wi = s.in_width;
                const std::size_t Ho = s.out_height, Wo = s.out_width;
                const double* w = p;
                const double* b = p + Co * Ci * k * k;
                Tensor out(Co, s.out_length);
                for (std::size_t co = 0; co < Co; ++co)
                    for (std::size_t oy = 0; oy < Ho; ++oy)
                        for (std::size_t ox = 0; ox < Wo; ++ox) {
                            double acc = b[co];
                            for (std::size_t ci = 0; ci < Ci; ++ci) {
                                const double* wmat = w + ((co * Ci + ci) * k) * k;
                                const double* xch = x.v.data() + ci * s.in_length;
                                for (std::size_t ty = 0; ty < k; ++ty) {
                                    std::size_t py = oy * st + ty;
                                    if (py < pd || py - pd >= Hi) continue;
                                    for (std::size_t tx = 0; tx < k; ++tx) {
                                        std::size_t px = ox * st + tx;
                                        if (px < pd || px - pd >= Wi) continue;
                                        acc += wmat[ty * k + tx] *
                                               xch[(py - pd) * Wi + (px - pd)];
                                    }
                                }
                            }
                            out.at(co, oy * Wo + ox) = act_apply(s.act, acc);
                        }
                push(std::move(out));
                break;
            }
            case LayerKind::conv2d_transpose: {
                Tensor x = pop();
                const std::size_t Ci = s.in_channels, Co = s.out_channels;
                const std::size_t k = s.kernel, st = s.stride, pd = s.padding;
                const std::size_t Hi = s.in_height, Wi = s.in_width;
                const std::size_t Ho = s.out_height, Wo = s.out_width;
                const double* w = p;
                const double* b = p + Ci * Co * k * k;
                Tensor out(Co, s.out_length);
                for (std::size_t co = 0; co < Co; ++co) {
                    double* och = out.v.data() + co * s.out_length;
                    for (std::size_t o = 0; o < s.out_length; ++o) och[o] = b[co];
                }
                for (std::size_t ci = 0; ci < Ci; ++ci)
                    for (std::size_t jy = 0; jy < Hi; ++jy)
                        for (std::size_t jx = 0; jx < Wi; ++jx) {
                            double xv = x.at(ci, jy * Wi + jx);
                            if (xv == 0.0) continue;
                            for (std::size_t co = 0; co < Co; ++co) {
                                const double* wmat = w + ((ci * Co + co) * k) * k;
                                double* och = out.v.data() + co * s.out_length;
                                for (std::size_t ty = 0; ty < k; ++ty) {
                                    std::size_t py = jy * st + ty;
                                    if (py < pd || py - pd >= Ho) continue;
                                    for (std::size_t tx = 0; tx < k; ++tx) {
                                        std::size_t px = jx * st + tx;
                                        if (px < pd || px - pd >= Wo) continue;
                                        och[(py - pd) * Wo + (px - pd)] +=
                                            wmat[ty * k + tx] * xv;
                                    }
                                }
                            }
                        }
                if (s.act != Act::identity)
                    for (double& v : out.v) v = act_apply(s.act, v);
                push(std::move(out));
                break;
            }
            case LayerKind::fully_connected: {
                Tensor x = pop();
                const std::size_t in = s.in_features, on = s.out_features;
                const double* w = p;
                const double* b = p + on * in;
                Tensor out(1, on);
                for (std::size_t o = 0; o < on; ++o) {
                    const double* wrow = w + o * in;
                    double acc = b[o];
                    for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x.v[i];
                    out.v[o] = act_apply(s.act, acc);
                }
                push(std::move(out));
                break;
            }
            case LayerKind::activation: {
                Tensor x = pop();
                Tensor out(x.channels, x.length);
                if (s.has_bias)
                    for (std::size_t i = 0; i < x.size(); ++i)
                        out.v[i] = act_apply(s.act, x.v[i] + p[i]);
                else
                    for (std::size_t i = 0; i < x.size(); ++i)
                        out.v[i] = act_apply(s.act, x.v[i]);
                push(std::move(out));
                break;
            }
            case LayerKind::split_channels: {
                Tensor x = pop();
                const std::size_t L = x.length;
                Tensor a(s.split_at, L);
                Tensor b(x.channels - s.split_at, L);
                std::copy(x.v.begin(), x.v.begin() + static_cast<std::ptrdiff_t>(s.split_at * L),
                          a.v.begin());
                std::copy(x.v.begin() + static_cast<std::ptrdiff_t>(s.split_at * L), x.v.end(),
                          b.v.begin());
                push(std::move(a));
                push(std::move(b));
                break;
            }
            case LayerKind::concat_channels: {
                Tensor b = pop();
                Tensor a = pop();
                Tensor out(a.channels + b.channels, a.length);
                std::copy(a.v.begin(), a.v.end(), out.v.begin());
                std::copy(b.v.begin(), b.v.end(),
                          out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
                push(std::move(out));
                break;
            }
            case LayerKind::sum_channels: {
                Tensor x = pop();
                const std::size_t half = x.channels / 2, L = x.length;
                Tensor out(half, L);
                for (std::size_t c = 0; c < half; ++c)
                    for (std::size_t i = 0; i < L; ++i)
                        out.at(c, i) = x.at(c, i) + x.at(c + half, i);
                push(std::move(out));
                break;
            }
            case LayerKind::reshape: {
                Tensor x = pop();
                Tensor out(s.reshape_channels, s.reshape_length);
                out.v = std::move(x.v);
                push(std::move(out));
                break;
            }
            case LayerKind::duplicate: {
                Tensor x = pop();
                Tensor copy = x;
                push(std::move(x));
                push(std::move(copy));
                break;
            }
            case LayerKind::swap_top: {
                Tensor b = pop();
                Tensor a = pop();
                push(std::move(b));
                push(std::move(a));
                break;
            }
            case LayerKind::replicate_channels: {
                Tensor x = pop();
                const std::size_t C = x.channels, L = x.length;
                Tensor out(C * s.replicas, L);
                for (std::size_t r = 0; r < s.replicas; ++r)
                    std::copy(x.v.begin(), x.v.end(),
                              out.v.begin() + static_cast<std::ptrdiff_t>(r * C * L));
                push(std::move(out));
                break;
            }
        }
    }

    // The gradient stack mirrors the forward value stack: pop one gradient per
    // output (top first), push input gradients so the earliest-popped input's
    // gradient ends back on top.
    void backward_layer(std::size_t l, const TapeEntry& e, std::vector<Tensor>& gs,
                        std::vector<double>& grads) const {
        const LayerSpec& s = layers_[l];
        const double* p = params_.data() + offsets_[l];
        double* g = grads.data() + offsets_[l];
        auto pop = [&]() {
            Tensor t = std::move(gs.back());
            gs.pop_back();
            return t;
        };
        switch (s.kind) {
            case LayerKind::permute: {
                Tensor go = pop();
                const auto& ord = orderings_[s.ordering];
                Tensor gi(go.channels, go.length);
                for (std::size_t c = 0; c < go.channels; ++c)
                    for (std::size_t i = 0; i < go.length; ++i)
                        gi.at(c, ord[i]) = go.at(c, i);
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::inverse_permute: {
                Tensor go = pop();
                const auto& ord = orderings_[s.ordering];
                Tensor gi(go.channels, go.length);
                for (std::size_t c = 0; c < go.channels; ++c)
                    for (std::size_t i = 0; i < go.length; ++i)
                        gi.at(c, i) = go.at(c, ord[i]);
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::sparse1: {
                Tensor go = pop();
                const Tensor& x = e.inputs[0];
                const Tensor& out = e.outputs[0];
                const std::size_t n = x.size();
                const double* w = p;
                Tensor gi(x.channels, x.length);
                for (std::size_t i = 0; i < n; ++i) {
                    double gpre = go.v[i] * act_grad_from_output(s.act, out.v[i]);
                    g[i] += gpre * x.v[i];
                    if (s.has_bias) g[n + i] += gpre;
                    gi.v[i] = gpre * w[i];
                }
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::sparse3: {
                Tensor go = pop();
                const Tensor& x = e.inputs[0];
                const Tensor& out = e.outputs[0];
                const std::size_t L = x.length, n = x.size();
                const double* w = p;
                const double* wp = p + n;
                const double* wm = p + 2 * n;
                Tensor gi(x.channels, x.length);
                for (std::size_t c = 0; c < x.channels; ++c)
                    for (std::size_t i = 0; i < L; ++i) {
                        std::size_t idx = c * L + i;
                        double gpre = go.v[idx] * act_grad_from_output(s.act, out.v[idx]);
                        g[idx] += gpre * x.v[idx];
                        gi.v[idx] += gpre * w[idx];
                        if (i + 1 < L) {
                            g[n + idx] += gpre * x.v[idx + 1];
                            gi.v[idx + 1] += gpre * wp[idx];
                        }
                        if (i > 0) {
                            g[2 * n + idx] += gpre * x.v[idx - 1];
                            gi.v[idx - 1] += gpre * wm[idx];
                        }
                        if (s.has_bias) g[3 * n + idx] += gpre;
                    }
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::conv1d: {
                Tensor go = pop();
                const Tensor& x = e.inputs[0];
                const Tensor& out = e.outputs[0];
                const std::size_t Ci = s.in_channels, Co = s.out_channels;
                const std::size_t k = s.kernel, st = s.stride, pd = s.padding;
                const double* w = p;
                double* gw = g;
                double* gb = g + Co * Ci * k;
                Tensor gi(Ci, s.in_length);
                for (std::size_t co = 0; co < Co; ++co)
                    for (std::size_t j = 0; j < s.out_length; ++j) {
                        double gpre = go.at(co, j) *
                                      act_grad_from_output(s.act, out.at(co, j));
                        if (gpre == 0.0) continue;
                        gb[co] += gpre;
                        for (std::size_t ci = 0; ci < Ci; ++ci) {
                            const double* wrow = w + (co * Ci + ci) * k;
                            double* gwrow = gw + (co * Ci + ci) * k;
                            const double* xrow = x.v.data() + ci * s.in_length;
                            double* girow = gi.v.data() + ci * s.in_length;
                            for (std::size_t t = 0; t < k; ++t) {
                                std::size_t pos = j * st + t;
                                if (pos < pd || pos - pd >= s.in_length) continue;
                                gwrow[t] += gpre * xrow[pos - pd];
                                girow[pos - pd] += gpre * wrow[t];
                            }
                        }
                    }
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::conv1d_transpose: {
                Tensor go = pop();
                const Tensor& x = e.inputs[0];
                const Tensor& out = e.outputs[0];
                const std::size_t Ci = s.in_channels, Co = s.out_channels;
                const std::size_t k = s.kernel, st = s.stride, pd = s.padding;
                const double* w = p;
                double* gw = g;
                double* gb = g + Ci * Co * k;
                Tensor gpre(Co, s.out_length);
                for (std::size_t i = 0; i < gpre.size(); ++i)
                    gpre.v[i] = go.v[i] * act_grad_from_output(s.act, out.v[i]);
                for (std::size_t co = 0; co < Co; ++co) {
                    const double* row = gpre.v.data() + co * s.out_length;
                    for (std::size_t o = 0; o < s.out_length; ++o) gb[co] += row[o];
                }
                Tensor gi(Ci, s.in_length);
                for (std::size_t ci = 0; ci < Ci; ++ci)
                    for (std::size_t j = 0; j < s.in_length; ++j) {
                        double xv = x.at(ci, j);
                        double acc = 0.0;
                        for (std::size_t co = 0; co < Co; ++co) {
                            const double* wrow = w + (ci * Co + co) * k;
                            double* gwrow = gw + (ci * Co + co) * k;
                            const double* grow = gpre.v.data() + co * s.out_length;
                            for (std::size_t t = 0; t < k; ++t) {
                                std::size_t pos = j * st + t;
                                if (pos < pd || pos - pd >= s.out_length) continue;
                                double gp = grow[pos - pd];
                                gwrow[t] += gp * xv;
                                acc += gp * wrow[t];
                            }
                        }
                        gi.at(ci, j) = acc;
                    }
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::conv2d: {
                Tensor go = pop();
                const Tensor& x = e.inputs[0];
                const Tensor& out = e.outputs[0];
                const std::size_t Ci = s.in_channels, Co = s.out_channels;
                const std::size_t k = s.kernel, st = s.stride, pd = s.padding;
                const std::size_t Hi = s.in_height, Wi = s.in_width;
                const std::size_t Ho = s.out_height, Wo = s.out_width;
                const double* w = p;
                double* gw = g;
                double* gb = g + Co * Ci * k * k;
                Tensor gi(Ci, s.in_length);
                for (std::size_t co = 0; co < Co; ++co)
                    for (std::size_t oy = 0; oy < Ho; ++oy)
                        for (std::size_t ox = 0; ox < Wo; ++ox) {
                            std::size_t oidx = co * s.out_length + oy * Wo + ox;
                            double gpre =
                                go.v[oidx] * act_grad_from_output(s.act, out.v[oidx]);
                            if (gpre == 0.0) continue;
                            gb[co] += gpre;
                            for (std::size_t ci = 0; ci < Ci; ++ci) {
                                const double* wmat = w + ((co * Ci + ci) * k) * k;
                                double* gwmat = gw + ((co * Ci + ci) * k) * k;
                                const double* xch = x.v.data() + ci * s.in_length;
                                double* gich = gi.v.data() + ci * s.in_length;
                                for (std::size_t ty = 0; ty < k; ++ty) {
                                    std::size_t py = oy * st + ty;
                                    if (py < pd || py - pd >= Hi) continue;
                                    for (std::size_t tx = 0; tx < k; ++tx) {
                                        std::size_t px = ox * st + tx;
                                        if (px < pd || px - pd >= Wi) continue;
                                        std::size_t xi = (py - pd) * Wi + (px - pd);
                                        gwmat[ty * k + tx] += gpre * xch[xi];
                                        gich[xi] += gpre * wmat[ty * k + tx];
                                    }
                                }
                            }
                        }
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::conv2d_transpose: {
                Tensor go = pop();
                const Tensor& x = e.inputs[0];
                const Tensor& out = e.outputs[0];
                const std::size_t Ci = s.in_channels, Co = s.out_channels;
                const std::size_t k = s.kernel, st = s.stride, pd = s.padding;
                const std::size_t Hi = s.in_height, Wi = s.in_width;
                const std::size_t Ho = s.out_height, Wo = s.out_width;
                const double* w = p;
                double* gw = g;
                double* gb = g + Ci * Co * k * k;
                Tensor gpre(Co, s.out_length);
                for (std::size_t i = 0; i < gpre.size(); ++i)
                    gpre.v[i] = go.v[i] * act_grad_from_output(s.act, out.v[i]);
                for (std::size_t co = 0; co < Co; ++co) {
                    const double* row = gpre.v.data() + co * s.out_length;
                    for (std::size_t o = 0; o < s.out_length; ++o) gb[co] += row[o];
                }
                Tensor gi(Ci, s.in_length);
                for (std::size_t ci = 0; ci < Ci; ++ci)
                    for (std::size_t jy = 0; jy < Hi; ++jy)
                        for (std::size_t jx = 0; jx < Wi; ++jx) {
                            double xv = x.at(ci, jy * Wi + jx);
                            double acc = 0.0;
                            for (std::size_t co = 0; co < Co; ++co) {
                                const double* wmat = w + ((ci * Co + co) * k) * k;
                                double* gwmat = gw + ((ci * Co + co) * k) * k;
                                const double* gch = gpre.v.data() + co * s.out_length;
                                for (std::size_t ty = 0; ty < k; ++ty) {
                                    std::size_t py = jy * st + ty;
                                    if (py < pd || py - pd >= Ho) continue;
                                    for (std::size_t tx = 0; tx < k; ++tx) {
                                        std::size_t px = jx * st + tx;
                                        if (px < pd || px - pd >= Wo) continue;
                                        double gp = gch[(py - pd) * Wo + (px - pd)];
                                        gwmat[ty * k + tx] += gp * xv;
                                        acc += gp * wmat[ty * k + tx];
                                    }
                                }
                            }
                            gi.at(ci, jy * Wi + jx) = acc;
                        }
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::fully_connected: {
                Tensor go = pop();
                const Tensor& x = e.inputs[0];
                const Tensor& out = e.outputs[0];
                const std::size_t in = s.in_features, on = s.out_features;
                const double* w = p;
                double* gw = g;
                double* gb = g + on * in;
                Tensor gi(s.in_channels, s.in_length);
                for (std::size_t o = 0; o < on; ++o) {
                    double gpre = go.v[o] * act_grad_from_output(s.act, out.v[o]);
                    if (gpre == 0.0) continue;
                    gb[o] += gpre;
                    const double* wrow = w + o * in;
                    double* gwrow = gw + o * in;
                    for (std::size_t i = 0; i < in; ++i) {
                        gwrow[i] += gpre * x.v[i];
                        gi.v[i] += gpre * wrow[i];
                    }
                }
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::activation: {
                Tensor go = pop();
                const Tensor& out = e.outputs[0];
                Tensor gi(go.channels, go.length);
                for (std::size_t i = 0; i < go.size(); ++i) {
                    double gpre = go.v[i] * act_grad_from_output(s.act, out.v[i]);
                    if (s.has_bias) g[i] += gpre;
                    gi.v[i] = gpre;
                }
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::split_channels: {
                Tensor gb = pop(); // gradient of the top output (channels split_at..C)
                Tensor ga = pop();
                Tensor gi(s.in_channels, s.in_length);
                std::copy(ga.v.begin(), ga.v.end(), gi.v.begin());
                std::copy(gb.v.begin(), gb.v.end(),
                          gi.v.begin() + static_cast<std::ptrdiff_t>(ga.v.size()));
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::concat_channels: {
                Tensor go = pop();
                const std::size_t ca = s.split_at; // channels of the first input
                Tensor ga(ca, s.out_length);
                Tensor gbt(s.out_channels - ca, s.out_length);
                std::copy(go.v.begin(), go.v.begin() + static_cast<std::ptrdiff_t>(ga.v.size()),
                          ga.v.begin());
                std::copy(go.v.begin() + static_cast<std::ptrdiff_t>(ga.v.size()), go.v.end(),
                          gbt.v.begin());
                gs.push_back(std::move(ga));
                gs.push_back(std::move(gbt));
                break;
            }
            case LayerKind::sum_channels: {
                Tensor go = pop();
                const std::size_t half = s.out_channels, L = s.out_length;
                Tensor gi(s.in_channels, L);
                for (std::size_t c = 0; c < half; ++c)
                    for (std::size_t i = 0; i < L; ++i) {
                        gi.at(c, i) = go.at(c, i);
                        gi.at(c + half, i) = go.at(c, i);
                    }
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::reshape: {
                Tensor go = pop();
                Tensor gi(s.in_channels, s.in_length);
                gi.v = std::move(go.v);
                gs.push_back(std::move(gi));
                break;
            }
            case LayerKind::duplicate: {
                Tensor g2 = pop();
                Tensor g1 = pop();
                for (std::size_t i = 0; i < g1.size(); ++i) g1.v[i] += g2.v[i];
                gs.push_back(std::move(g1));
                break;
            }
            case LayerKind::swap_top: {
                Tensor ga = pop();
                Tensor gbt = pop();
                gs.push_back(std::move(ga));
                gs.push_back(std::move(gbt));
                break;
            }
            case LayerKind::replicate_channels: {
                Tensor go = pop();
                const std::size_t C = s.in_channels, L = s.in_length;
                Tensor gi(C, L);
                for (std::size_t r = 0; r < s.replicas; ++r) {
                    const double* block = go.v.data() + r * C * L;
                    for (std::size_t i = 0; i < C * L; ++i) gi.v[i] += block[i];
                }
                gs.push_back(std::move(gi));
                break;
            }
        }
    }
};

// Mean squared error over all values; for two-channel fields the channels are
// treated as vector components and the error is measured on the magnitude
// sqrt(c0^2 + c1^2) instead, per node.
inline double eval_mse(const Tensor& pred, const Tensor& target) {
    if (pred.channels != target.channels || pred.length != target.length)
        throw std::invalid_argument("eval_mse: tensor shapes differ");
    if (pred.channels == 2) {
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.length; ++i) {
            double mp = std::hypot(pred.at(0, i), pred.at(1, i));
            double mt = std::hypot(target.at(0, i), target.at(1, i));
            acc += (mp - mt) * (mp - mt);
        }
        return acc / static_cast<double>(pred.length);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred.v[i] - target.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

inline double plain_mse(const Tensor& pred, const Tensor& target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("plain_mse: tensor shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred.v[i] - target.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

} // namespace curveweave
