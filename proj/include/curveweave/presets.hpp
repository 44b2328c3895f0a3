#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "curveweave/nn.hpp"

namespace curveweave {

// Named autoencoder families. The curve-based ones need one ordering (sfc1*)
// or two (sfc2*); classical2d works on the raw planar grid instead. The -nn
// variants add the trainable three-point smoothing layers in curve order.
inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = {"classical2d", "sfc1", "sfc2", "sfc1-nn",
                                                   "sfc2-nn"};
    return names;
}

struct PresetConfig {
    std::string name;
    std::size_t n_nodes = 0;
    std::size_t n_channels = 1;
    std::size_t latent = 0;
    std::size_t grid_nx = 0, grid_ny = 0; // classical2d only
    std::vector<std::vector<std::uint32_t>> orderings;
};

namespace preset_detail {

// Depth scales with problem size: one convolution stage per factor-of-four
// of nodes beyond a small base, capped at the four stages used at full scale.
inline std::size_t stage_count(std::size_t n_nodes) {
    std::size_t log4 = 0;
    while ((static_cast<std::size_t>(1) << (2 * (log4 + 1))) <= n_nodes) ++log4;
    std::size_t s = log4 > 2 ? log4 - 2 : 1;
    return std::min<std::size_t>(std::max<std::size_t>(s, 1), 4);
}

inline std::vector<std::size_t> fc_hidden_widths(std::size_t stages, bool two_branch) {
    if (stages >= 4) return two_branch ? std::vector<std::size_t>{512, 128}
                                       : std::vector<std::size_t>{256, 64};
    if (stages == 3) return two_branch ? std::vector<std::size_t>{128}
                                       : std::vector<std::size_t>{64};
    return two_branch ? std::vector<std::size_t>{64} : std::vector<std::size_t>{32};
}

// Transposed stage geometry for kernel 32, stride 4: pick padding and output
// padding so the stage maps length `from` exactly onto `to`.
inline std::pair<std::size_t, std::size_t> derive_tconv_padding(std::size_t from, std::size_t to) {
    long long need = 4ll * static_cast<long long>(from) + 28 - static_cast<long long>(to);
    long long op = need >= 0 ? (need & 1) : -need;
    long long pad2 = need + op;
    if (op < 0 || op > 3 || pad2 < 0 || pad2 % 2 != 0)
        throw std::invalid_argument("decoder stage cannot map length " + std::to_string(from) +
                                    " to " + std::to_string(to));
    return {static_cast<std::size_t>(pad2 / 2), static_cast<std::size_t>(op)};
}

struct ConvPlan {
    std::vector<std::size_t> enc_lengths;   // after each encoder stage
    std::vector<std::size_t> enc_channels;  // after each encoder stage
    std::vector<std::size_t> dec_lengths;   // after each decoder stage (last == n_nodes)
    std::size_t dec_start_length = 0;
    std::size_t stages = 0;
};

inline ConvPlan plan_conv1d(std::size_t n_nodes, std::size_t base_channels) {
    ConvPlan plan;
    plan.stages = stage_count(n_nodes);
    std::size_t len = n_nodes, ch = base_channels;
    for (std::size_t s = 0; s < plan.stages; ++s) {
        len = len / 4 + 1; // kernel 32, stride 4, padding 16
        ch *= 2;
        plan.enc_lengths.push_back(len);
        plan.enc_channels.push_back(ch);
    }
    std::size_t pow4 = static_cast<std::size_t>(1) << (2 * plan.stages);
    if (n_nodes % pow4 == 0) {
        // power-of-four geometry: decoder lengths quadruple every stage
        plan.dec_start_length = n_nodes / pow4;
        std::size_t t = plan.dec_start_length;
        for (std::size_t s = 0; s < plan.stages; ++s) {
            t *= 4;
            plan.dec_lengths.push_back(t);
        }
    } else {
        // irregular node counts: retrace the encoder lengths in reverse
        plan.dec_start_length = plan.enc_lengths.back();
        for (std::size_t s = plan.stages - 1; s-- > 0;)
            plan.dec_lengths.push_back(plan.enc_lengths[s]);
        plan.dec_lengths.push_back(n_nodes);
    }
    return plan;
}

inline LayerSpec conv1d_spec(std::size_t out_ch, Act act) {
    LayerSpec s;
    s.kind = LayerKind::conv1d;
    s.out_channels = out_ch;
    s.kernel = 32;
    s.stride = 4;
    s.padding = 16;
    s.act = act;
    return s;
}

inline LayerSpec tconv1d_spec(std::size_t out_ch, std::size_t from, std::size_t to, Act act) {
    auto [pad, opad] = derive_tconv_padding(from, to);
    LayerSpec s;
    s.kind = LayerKind::conv1d_transpose;
    s.out_channels = out_ch;
    s.kernel = 32;
    s.stride = 4;
    s.padding = pad;
    s.output_padding = opad;
    s.act = act;
    return s;
}

inline LayerSpec fc_spec(std::size_t out_features, Act act) {
    LayerSpec s;
    s.kind = LayerKind::fully_connected;
    s.out_features = out_features;
    s.act = act;
    return s;
}

inline LayerSpec reshape_spec(std::size_t ch, std::size_t len, std::size_t h = 0,
                              std::size_t w = 0) {
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.reshape_channels = ch;
    s.reshape_length = len;
    s.reshape_height = h;
    s.reshape_width = w;
    return s;
}

inline LayerSpec simple_spec(LayerKind kind) {
    LayerSpec s;
    s.kind = kind;
    return s;
}

inline LayerSpec permute_spec(LayerKind kind, std::size_t ordering) {
    LayerSpec s;
    s.kind = kind;
    s.ordering = ordering;
    return s;
}

inline LayerSpec sparse3_spec(bool bias, Act act) {
    LayerSpec s;
    s.kind = LayerKind::sparse3;
    s.has_bias = bias;
    s.act = act;
    return s;
}

inline LayerSpec activation_spec(Act act, bool bias) {
    LayerSpec s;
    s.kind = LayerKind::activation;
    s.act = act;
    s.has_bias = bias;
    return s;
}

inline LayerSpec split_spec(std::size_t at) {
    LayerSpec s;
    s.kind = LayerKind::split_channels;
    s.split_at = at;
    return s;
}

inline LayerSpec replicate_spec(std::size_t replicas) {
    LayerSpec s;
    s.kind = LayerKind::replicate_channels;
    s.replicas = replicas;
    return s;
}

// Encoder branch for one curve: reorder into curve positions, optionally
// smooth, convolve down, flatten to a single row.
inline void append_branch_encoder(std::vector<LayerSpec>& ls, std::size_t ordering, bool smoothing,
                                  Act fam, const ConvPlan& plan, std::size_t in_ch) {
    ls.push_back(permute_spec(LayerKind::permute, ordering));
    if (smoothing) ls.push_back(sparse3_spec(true, fam));
    std::size_t ch = in_ch;
    for (std::size_t s = 0; s < plan.stages; ++s) {
        ch = plan.enc_channels[s] * in_ch; // plan built with base 1; scale by input channels
        ls.push_back(conv1d_spec(ch, fam));
    }
    ls.push_back(reshape_spec(1, ch * plan.enc_lengths.back()));
}

// Decoder branch: transposed convolutions back to full length, optionally
// smooth in curve order, return to node order.
inline void append_branch_decoder(std::vector<LayerSpec>& ls, std::size_t ordering, bool smoothing,
                                  Act fam, const ConvPlan& plan, std::size_t out_ch,
                                  Act final_act) {
    std::size_t len = plan.dec_start_length;
    for (std::size_t s = 0; s < plan.stages; ++s) {
        std::size_t next_ch = s + 1 == plan.stages
                                  ? out_ch
                                  : plan.enc_channels[plan.stages - 2 - s] * out_ch;
        Act act = s + 1 == plan.stages ? final_act : fam;
        ls.push_back(tconv1d_spec(next_ch, len, plan.dec_lengths[s], act));
        len = plan.dec_lengths[s];
    }
    if (smoothing) ls.push_back(sparse3_spec(false, Act::identity));
    ls.push_back(permute_spec(LayerKind::inverse_permute, ordering));
}

inline Model build_sfc1(const PresetConfig& cfg, bool smoothing) {
    const Act fam = cfg.n_channels == 2 ? Act::tanh_fn : Act::relu;
    const std::size_t N = cfg.n_nodes;
    ConvPlan plan = plan_conv1d(N, 1);
    std::vector<LayerSpec> ls;
    std::size_t conv_in;
    if (cfg.n_channels == 2 && smoothing) {
        // two components: smooth each one independently over a widened copy,
        // then convolve both jointly
        ls.push_back(permute_spec(LayerKind::permute, 0));
        ls.push_back(split_spec(1));
        ls.push_back(replicate_spec(2));
        ls.push_back(sparse3_spec(true, fam));
        ls.push_back(simple_spec(LayerKind::swap_top));
        ls.push_back(replicate_spec(2));
        ls.push_back(sparse3_spec(true, fam));
        ls.push_back(simple_spec(LayerKind::concat_channels));
        conv_in = 4;
        std::size_t ch = conv_in;
        for (std::size_t s = 0; s < plan.stages; ++s) {
            ch = plan.enc_channels[s] * conv_in;
            ls.push_back(conv1d_spec(ch, fam));
        }
        ls.push_back(reshape_spec(1, ch * plan.enc_lengths.back()));
    } else if (cfg.n_channels == 1 || cfg.n_channels == 2) {
        conv_in = cfg.n_channels;
        append_branch_encoder(ls, 0, smoothing && cfg.n_channels == 1, fam, plan, conv_in);
    } else {
        throw std::invalid_argument("sfc presets support one or two channels, got " +
                                    std::to_string(cfg.n_channels));
    }
    std::vector<std::size_t> hid = fc_hidden_widths(plan.stages, false);
    for (std::size_t hsz : hid) ls.push_back(fc_spec(hsz, fam));
    const std::ptrdiff_t bottleneck = static_cast<std::ptrdiff_t>(ls.size());
    ls.push_back(fc_spec(cfg.latent, Act::identity));
    for (std::size_t i = hid.size(); i-- > 0;) ls.push_back(fc_spec(hid[i], fam));

    const std::size_t dec_out = cfg.n_channels == 2 && smoothing ? 4 : cfg.n_channels;
    const std::size_t dec_ch0 = plan.enc_channels.back() * dec_out;
    ls.push_back(fc_spec(dec_ch0 * plan.dec_start_length, fam));
    ls.push_back(reshape_spec(dec_ch0, plan.dec_start_length));
    if (cfg.n_channels == 2 && smoothing) {
        std::size_t len = plan.dec_start_length;
        for (std::size_t s = 0; s < plan.stages; ++s) {
            std::size_t next_ch = s + 1 == plan.stages
                                      ? dec_out
                                      : plan.enc_channels[plan.stages - 2 - s] * dec_out;
            ls.push_back(tconv1d_spec(next_ch, len, plan.dec_lengths[s],
                                      s + 1 == plan.stages ? Act::identity : fam));
            len = plan.dec_lengths[s];
        }
        ls.push_back(sparse3_spec(false, Act::identity));
        ls.push_back(split_spec(2));
        ls.push_back(simple_spec(LayerKind::sum_channels));
        ls.push_back(simple_spec(LayerKind::swap_top));
        ls.push_back(simple_spec(LayerKind::sum_channels));
        ls.push_back(simple_spec(LayerKind::concat_channels));
        ls.push_back(permute_spec(LayerKind::inverse_permute, 0));
        ls.push_back(activation_spec(fam, true));
    } else if (smoothing) {
        append_branch_decoder(ls, 0, true, fam, plan, cfg.n_channels, Act::identity);
        ls.push_back(activation_spec(fam, true));
    } else {
        append_branch_decoder(ls, 0, false, fam, plan, cfg.n_channels, fam);
    }
    return Model(std::move(ls), cfg.n_channels, N, cfg.orderings, cfg.name, cfg.latent, 0, 0,
                 bottleneck);
}

inline Model build_sfc2(const PresetConfig& cfg, bool smoothing) {
    if (cfg.n_channels != 1)
        throw std::invalid_argument("two-curve presets support single-channel fields, got " +
                                    std::to_string(cfg.n_channels) + " channels");
    const Act fam = Act::relu;
    const std::size_t N = cfg.n_nodes;
    ConvPlan plan = plan_conv1d(N, 1);
    const std::size_t branch_flat = plan.enc_channels.back() * plan.enc_lengths.back();

    std::vector<LayerSpec> ls;
    ls.push_back(simple_spec(LayerKind::duplicate));
    append_branch_encoder(ls, 0, smoothing, fam, plan, 1);
    ls.push_back(simple_spec(LayerKind::swap_top));
    append_branch_encoder(ls, 1, smoothing, fam, plan, 1);
    ls.push_back(simple_spec(LayerKind::concat_channels));
    ls.push_back(reshape_spec(1, 2 * branch_flat));

    std::vector<std::size_t> hid = fc_hidden_widths(plan.stages, true);
    for (std::size_t hsz : hid) ls.push_back(fc_spec(hsz, fam));
    const std::ptrdiff_t bottleneck = static_cast<std::ptrdiff_t>(ls.size());
    ls.push_back(fc_spec(cfg.latent, Act::identity));
    for (std::size_t i = hid.size(); i-- > 0;) ls.push_back(fc_spec(hid[i], fam));

    const std::size_t dec_ch0 = plan.enc_channels.back();
    ls.push_back(fc_spec(2 * dec_ch0 * plan.dec_start_length, fam));
    ls.push_back(reshape_spec(2 * dec_ch0, plan.dec_start_length));
    ls.push_back(split_spec(dec_ch0));
    append_branch_decoder(ls, 1, smoothing, fam, plan, 1, Act::identity);
    ls.push_back(simple_spec(LayerKind::swap_top));
    append_branch_decoder(ls, 0, smoothing, fam, plan, 1, Act::identity);
    ls.push_back(simple_spec(LayerKind::concat_channels));
    ls.push_back(simple_spec(LayerKind::sum_channels));
    ls.push_back(activation_spec(fam, true));
    return Model(std::move(ls), 1, N, cfg.orderings, cfg.name, cfg.latent, 0, 0, bottleneck);
}

inline Model build_classical2d(const PresetConfig& cfg) {
    if (cfg.n_channels != 1)
        throw std::invalid_argument("classical2d supports single-channel fields");
    const std::size_t nx = cfg.grid_nx, ny = cfg.grid_ny;
    if (nx * ny != cfg.n_nodes || nx == 0)
        throw std::invalid_argument("classical2d needs grid dimensions matching the node count");
    const Act fam = Act::relu;
    const std::size_t stages = stage_count(cfg.n_nodes);
    const std::size_t pow2 = static_cast<std::size_t>(1) << stages;
    if (nx % pow2 != 0 || ny % pow2 != 0)
        throw std::invalid_argument("classical2d needs grid dimensions divisible by " +
                                    std::to_string(pow2));

    std::vector<std::size_t> channels;
    for (std::size_t s = 0; s < stages; ++s) channels.push_back(4u << s); // 4, 8, 16, 32

    std::vector<LayerSpec> ls;
    for (std::size_t s = 0; s < stages; ++s) {
        LayerSpec c;
        c.kind = LayerKind::conv2d;
        c.out_channels = channels[s];
        c.kernel = 5;
        c.stride = 2;
        c.padding = 2;
        c.act = fam;
        ls.push_back(c);
    }
    std::vector<std::size_t> hid = fc_hidden_widths(stages, false);
    for (std::size_t hsz : hid) ls.push_back(fc_spec(hsz, fam));
    const std::ptrdiff_t bottleneck = static_cast<std::ptrdiff_t>(ls.size());
    ls.push_back(fc_spec(cfg.latent, Act::identity));
    for (std::size_t i = hid.size(); i-- > 0;) ls.push_back(fc_spec(hid[i], fam));

    const std::size_t h0 = ny / pow2, w0 = nx / pow2;
    ls.push_back(fc_spec(channels.back() * h0 * w0, fam));
    ls.push_back(reshape_spec(channels.back(), h0 * w0, h0, w0));
    for (std::size_t s = 0; s < stages; ++s) {
        LayerSpec c;
        c.kind = LayerKind::conv2d_transpose;
        c.out_channels = s + 1 == stages ? 1 : channels[stages - 2 - s];
        c.kernel = 5;
        c.stride = 2;
        c.padding = 2;
        c.output_padding = 1;
        c.act = fam; // planar family keeps its final rectifier
        ls.push_back(c);
    }
    return Model(std::move(ls), 1, cfg.n_nodes, cfg.orderings, cfg.name, cfg.latent, ny, nx,
                 bottleneck);
}

} // namespace preset_detail

inline Model build_preset(const PresetConfig& cfg) {
    if (cfg.n_nodes < 2) throw std::invalid_argument("preset needs at least two nodes");
    if (cfg.latent == 0) throw std::invalid_argument("latent width must be positive");
    auto require_orderings = [&](std::size_t n) {
        if (cfg.orderings.size() != n)
            throw std::invalid_argument("preset '" + cfg.name + "' needs exactly " +
                                        std::to_string(n) + " ordering(s), got " +
                                        std::to_string(cfg.orderings.size()));
        for (const auto& o : cfg.orderings)
            if (o.size() != cfg.n_nodes)
                throw std::invalid_argument("ordering covers " + std::to_string(o.size()) +
                                            " vertices, dataset has " +
                                            std::to_string(cfg.n_nodes) + " nodes");
    };
    if (cfg.name == "classical2d") {
        require_orderings(0);
        return preset_detail::build_classical2d(cfg);
    }
    if (cfg.name == "sfc1") {
        require_orderings(1);
        return preset_detail::build_sfc1(cfg, false);
    }
    if (cfg.name == "sfc1-nn") {
        require_orderings(1);
        return preset_detail::build_sfc1(cfg, true);
    }
    if (cfg.name == "sfc2") {
        require_orderings(2);
        return preset_detail::build_sfc2(cfg, false);
    }
    if (cfg.name == "sfc2-nn") {
        require_orderings(2);
        return preset_detail::build_sfc2(cfg, true);
    }
    std::string valid;
    for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown preset '" + cfg.name + "'; valid presets: " + valid);
}

} // namespace curveweave
