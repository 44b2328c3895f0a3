#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "curveweave/datagen.hpp"
#include "curveweave/nn.hpp"
#include "curveweave/parallel.hpp"
#include "curveweave/rng.hpp"

namespace curveweave {

inline Tensor example_tensor(const SnapshotSet& set, std::size_t e) {
    Tensor t(set.n_channels, set.n_nodes);
    const auto& ex = set.examples[e];
    for (std::size_t i = 0; i < set.n_nodes; ++i)
        for (std::size_t c = 0; c < set.n_channels; ++c)
            t.at(c, i) = ex[i * set.n_channels + c];
    return t;
}

struct TrainConfig {
    std::size_t epochs = 500;
    std::size_t batch_size = 64;
    double learning_rate = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::uint64_t seed = 0;
};

struct EpochStats {
    double train_mse = 0.0;
    double val_mse = 0.0;
};

namespace train_detail {

// Work is split into a fixed number of slices regardless of the worker
// count, and slice results are reduced in slice order, so results are
// bitwise identical for any CURVEWEAVE_THREADS setting.
constexpr std::size_t kSlices = 16;

inline std::pair<std::size_t, std::size_t> slice_bounds(std::size_t n, std::size_t slice) {
    return {n * slice / kSlices, n * (slice + 1) / kSlices};
}

template <typename Fn>
void run_slices(std::size_t n, Fn&& fn) {
    std::size_t workers = std::min(static_cast<std::size_t>(worker_count()), kSlices);
    parallel_chunks(kSlices, workers, [&](std::size_t, std::size_t sb, std::size_t se) {
        for (std::size_t s = sb; s < se; ++s) {
            auto [b, e] = slice_bounds(n, s);
            if (b < e) fn(s, b, e);
        }
    });
}

} // namespace train_detail

// Mean squared reconstruction error over the given examples (plain,
// per-value; this is the quantity training minimizes).
inline double dataset_mse(const Model& model, const SnapshotSet& set,
                          const std::vector<std::size_t>& examples) {
    if (examples.empty()) return 0.0;
    double partial[train_detail::kSlices] = {};
    train_detail::run_slices(examples.size(), [&](std::size_t s, std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            Tensor x = example_tensor(set, examples[i]);
            Tensor y = model.forward(x);
            for (std::size_t k = 0; k < x.size(); ++k) {
                double d = y.v[k] - x.v[k];
                acc += d * d;
            }
        }
        partial[s] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total / (static_cast<double>(examples.size()) *
                    static_cast<double>(set.n_nodes * set.n_channels));
}

// Adam on the batched reconstruction loss. Examples with split label 0 train
// the model, label 1 is the per-epoch validation metric; without split labels
// every example trains and the running training loss doubles as validation.
inline std::vector<EpochStats> train_model(Model& model, const SnapshotSet& set,
                                           const TrainConfig& cfg) {
    if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (set.n_channels != model.in_channels() || set.n_nodes != model.in_length())
        throw std::invalid_argument(
            "dataset shape (" + std::to_string(set.n_channels) + ", " +
            std::to_string(set.n_nodes) + ") does not match the model input (" +
            std::to_string(model.in_channels()) + ", " + std::to_string(model.in_length()) + ")");

    std::vector<std::size_t> train_idx, val_idx;
    if (set.split.empty()) {
        for (std::size_t e = 0; e < set.n_examples(); ++e) train_idx.push_back(e);
    } else {
        for (std::size_t e = 0; e < set.n_examples(); ++e) {
            if (set.split[e] == 0) train_idx.push_back(e);
            if (set.split[e] == 1) val_idx.push_back(e);
        }
    }
    if (train_idx.empty()) throw std::invalid_argument("no training examples in the dataset");

    const std::size_t P = model.param_count();
    std::vector<double> grads(P, 0.0), m(P, 0.0), v(P, 0.0);
    std::vector<std::vector<double>> slice_grads(train_detail::kSlices,
                                                 std::vector<double>(P, 0.0));
    const double per_value = 1.0 / static_cast<double>(set.n_nodes * set.n_channels);

    Rng shuffler = Rng(cfg.seed).derive(0x7261696e);
    std::vector<EpochStats> history;
    history.reserve(cfg.epochs);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffler.shuffle(train_idx);
        double epoch_sq_sum = 0.0; // running loss, accumulated at pre-update weights
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const std::size_t bsz = std::min(cfg.batch_size, train_idx.size() - start);
            const double gscale = per_value / static_cast<double>(bsz);
            double loss_partial[train_detail::kSlices] = {};
            train_detail::run_slices(bsz, [&](std::size_t s, std::size_t b, std::size_t e) {
                Tape tape;
                double acc = 0.0;
                auto& sg = slice_grads[s];
                std::fill(sg.begin(), sg.end(), 0.0);
                for (std::size_t i = b; i < e; ++i) {
                    Tensor x = example_tensor(set, train_idx[start + i]);
                    Tensor y = model.forward(x, &tape);
                    Tensor gout(y.channels, y.length);
                    for (std::size_t k = 0; k < y.size(); ++k) {
                        double d = y.v[k] - x.v[k];
                        acc += d * d;
                        gout.v[k] = 2.0 * d * gscale;
                    }
                    model.backward(tape, gout, sg);
                }
                loss_partial[s] = acc;
            });
            std::fill(grads.begin(), grads.end(), 0.0);
            double batch_sq = 0.0;
            for (std::size_t s = 0; s < train_detail::kSlices; ++s) {
                batch_sq += loss_partial[s];
                auto [b, e] = train_detail::slice_bounds(bsz, s);
                if (b >= e) continue;
                const auto& sg = slice_grads[s];
                for (std::size_t k = 0; k < P; ++k) grads[k] += sg[k];
            }
            epoch_sq_sum += batch_sq;

            for (std::size_t k = 0; k < P; ++k)
                if (!std::isfinite(grads[k]))
                    throw std::runtime_error(
                        "non-finite gradient at parameter " + std::to_string(k) + " (epoch " +
                        std::to_string(epoch + 1) + ", step " + std::to_string(step + 1) +
                        "); lower the learning rate or inspect the input data");

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            auto& params = model.params();
            for (std::size_t k = 0; k < P; ++k) {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grads[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grads[k] * grads[k];
                params[k] -= cfg.learning_rate * (m[k] / bc1) /
                             (std::sqrt(v[k] / bc2) + cfg.adam_eps);
            }
        }
        EpochStats st;
        st.train_mse = epoch_sq_sum * per_value / static_cast<double>(train_idx.size());
        st.val_mse = val_idx.empty() ? st.train_mse : dataset_mse(model, set, val_idx);
        history.push_back(st);
    }
    return history;
}

inline void write_loss_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "epoch,train_mse,val_mse\n";
    char buf[96];
    for (std::size_t e = 0; e < history.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e + 1, history[e].train_mse,
                      history[e].val_mse);
        out << buf;
    }
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

// --- model checkpoint ----------------------------------------------------
// little-endian "CWM1": preset name, latent width, input shape, bottleneck
// layer, the ordering tables, every layer record, then the parameters. The
// orderings travel with the model so a saved model reconstructs fields
// without the original curve files.

namespace train_detail {

inline void write_u64(std::ostream& o, std::uint64_t v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::istream& in, const std::string& path) {
    std::uint64_t v;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("truncated model file '" + path + "'");
    return v;
}

} // namespace train_detail

inline void save_model(const std::string& path, const Model& model) {
    using train_detail::write_u64;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write("CWM1", 4);
    write_u64(out, model.preset_name().size());
    out.write(model.preset_name().data(),
              static_cast<std::streamsize>(model.preset_name().size()));
    write_u64(out, model.latent());
    write_u64(out, model.in_channels());
    write_u64(out, model.in_length());
    write_u64(out, model.in_height());
    write_u64(out, model.in_width());
    write_u64(out, static_cast<std::uint64_t>(model.bottleneck_layer() + 1)); // 0 = none
    write_u64(out, model.orderings().size());
    for (const auto& ord : model.orderings()) {
        write_u64(out, ord.size());
        out.write(reinterpret_cast<const char*>(ord.data()),
                  static_cast<std::streamsize>(ord.size() * sizeof(std::uint32_t)));
    }
    write_u64(out, model.layers().size());
    for (const LayerSpec& s : model.layers()) {
        write_u64(out, static_cast<std::uint64_t>(s.kind));
        write_u64(out, static_cast<std::uint64_t>(s.act));
        write_u64(out, s.has_bias ? 1 : 0);
        write_u64(out, s.out_channels);
        write_u64(out, s.kernel);
        write_u64(out, s.stride);
        write_u64(out, s.padding);
        write_u64(out, s.output_padding);
        write_u64(out, s.out_features);
        write_u64(out, s.ordering);
        write_u64(out, s.split_at);
        write_u64(out, s.replicas);
        write_u64(out, s.reshape_channels);
        write_u64(out, s.reshape_length);
        write_u64(out, s.reshape_height);
        write_u64(out, s.reshape_width);
    }
    write_u64(out, model.param_count());
    out.write(reinterpret_cast<const char*>(model.params().data()),
              static_cast<std::streamsize>(model.param_count() * sizeof(double)));
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline Model load_model(const std::string& path) {
    using train_detail::read_u64;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CWM1", 4) != 0)
        throw std::runtime_error("'" + path + "' is not a model file (bad magic)");
    std::string preset(read_u64(in, path), '\0');
    in.read(preset.data(), static_cast<std::streamsize>(preset.size()));
    if (!in) throw std::runtime_error("truncated model file '" + path + "'");
    std::uint64_t latent = read_u64(in, path);
    std::uint64_t in_ch = read_u64(in, path);
    std::uint64_t in_len = read_u64(in, path);
    std::uint64_t in_h = read_u64(in, path);
    std::uint64_t in_w = read_u64(in, path);
    std::ptrdiff_t bottleneck = static_cast<std::ptrdiff_t>(read_u64(in, path)) - 1;
    std::uint64_t n_ord = read_u64(in, path);
    std::vector<std::vector<std::uint32_t>> orderings(n_ord);
    for (auto& ord : orderings) {
        ord.resize(read_u64(in, path));
        in.read(reinterpret_cast<char*>(ord.data()),
                static_cast<std::streamsize>(ord.size() * sizeof(std::uint32_t)));
        if (!in) throw std::runtime_error("truncated model file '" + path + "'");
    }
    std::uint64_t n_layers = read_u64(in, path);
    std::vector<LayerSpec> layers(n_layers);
    for (LayerSpec& s : layers) {
        s.kind = static_cast<LayerKind>(read_u64(in, path));
        s.act = static_cast<Act>(read_u64(in, path));
        s.has_bias = read_u64(in, path) != 0;
        s.out_channels = read_u64(in, path);
        s.kernel = read_u64(in, path);
        s.stride = read_u64(in, path);
        s.padding = read_u64(in, path);
        s.output_padding = read_u64(in, path);
        s.out_features = read_u64(in, path);
        s.ordering = read_u64(in, path);
        s.split_at = read_u64(in, path);
        s.replicas = read_u64(in, path);
        s.reshape_channels = read_u64(in, path);
        s.reshape_length = read_u64(in, path);
        s.reshape_height = read_u64(in, path);
        s.reshape_width = read_u64(in, path);
    }
    Model model(std::move(layers), in_ch, in_len, std::move(orderings), preset, latent, in_h,
                in_w, bottleneck);
    std::uint64_t n_params = read_u64(in, path);
    if (n_params != model.param_count())
        throw std::runtime_error("model file '" + path + "' carries " +
                                 std::to_string(n_params) + " parameters, layer shapes need " +
                                 std::to_string(model.param_count()));
    in.read(reinterpret_cast<char*>(model.params().data()),
            static_cast<std::streamsize>(n_params * sizeof(double)));
    if (!in) throw std::runtime_error("truncated model file '" + path + "'");
    return model;
}

// Per-split evaluation metric: the magnitude rule for two-channel fields,
// plain squared error otherwise, averaged over the selected examples.
inline double evaluate_split(const Model& model, const SnapshotSet& set, std::uint8_t label) {
    std::vector<std::size_t> idx;
    for (std::size_t e = 0; e < set.n_examples(); ++e)
        if (label == 255 || (e < set.split.size() && set.split[e] == label)) idx.push_back(e);
    if (idx.empty()) return 0.0;
    double partial[train_detail::kSlices] = {};
    train_detail::run_slices(idx.size(), [&](std::size_t s, std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) {
            Tensor x = example_tensor(set, idx[i]);
            Tensor y = model.forward(x);
            acc += eval_mse(y, x);
        }
        partial[s] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total / static_cast<double>(idx.size());
}

} // namespace curveweave
