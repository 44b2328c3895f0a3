#include <catch2/catch_amalgamated.hpp>

#include "curveweave/datagen.hpp"
#include "curveweave/nn.hpp"
#include "curveweave/presets.hpp"
#include "curveweave/rng.hpp"
#include "curveweave/train.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

using namespace curveweave;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() /
                ("curveweave_nn_" + name + "_" + std::to_string(::getpid())))
                   .string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

std::vector<std::uint32_t> ident_ord(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::uint32_t>(i);
    return v;
}

LayerSpec layer(LayerKind k) {
    LayerSpec s;
    s.kind = k;
    return s;
}

Tensor random_tensor(std::size_t c, std::size_t l, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(c, l);
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

// Central-difference check of every parameter gradient and the input
// gradient against the tape backward pass, using the linear probe
// loss L = sum_i c_i out_i. Runs over several seeds; relative error
// capped at `tol`.
void check_gradients(Model& model, std::uint64_t seed0, int n_seeds = 5,
                     double tol = 1e-4) {
    const double h = 1e-5;
    const std::size_t P = model.param_count();
    for (int s = 0; s < n_seeds; ++s) {
        Rng rng(seed0 + static_cast<std::uint64_t>(s));
        model.init_params(rng);
        Tensor x = random_tensor(model.in_channels(), model.in_length(), rng);

        Tape tape;
        Tensor out = model.forward(x, &tape);
        Tensor probe = random_tensor(out.channels, out.length, rng);
        auto loss_of_output = [&](const Tensor& y) {
            double L = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) L += probe.v[i] * y.v[i];
            return L;
        };

        std::vector<double> grads(P, 0.0);
        model.backward(tape, probe, grads);
        Tensor gin = model.input_gradient(tape, probe);

        auto rel_ok = [&](double analytic, double numeric) {
            double scale = std::max({std::abs(analytic), std::abs(numeric), 1.0});
            return std::abs(analytic - numeric) <= tol * scale;
        };

        const std::size_t stride = std::max<std::size_t>(1, P / 120);
        auto& params = model.params();
        for (std::size_t k = 0; k < P; k += stride) {
            double keep = params[k];
            params[k] = keep + h;
            double lp = loss_of_output(model.forward(x));
            params[k] = keep - h;
            double lm = loss_of_output(model.forward(x));
            params[k] = keep;
            double numeric = (lp - lm) / (2.0 * h);
            INFO("seed " << s << " parameter " << k << ": analytic " << grads[k]
                         << " numeric " << numeric);
            REQUIRE(rel_ok(grads[k], numeric));
        }

        const std::size_t in_stride = std::max<std::size_t>(1, x.size() / 60);
        for (std::size_t k = 0; k < x.size(); k += in_stride) {
            Tensor xp = x, xm = x;
            xp.v[k] += h;
            xm.v[k] -= h;
            double numeric =
                (loss_of_output(model.forward(xp)) - loss_of_output(model.forward(xm))) /
                (2.0 * h);
            INFO("seed " << s << " input " << k << ": analytic " << gin.v[k] << " numeric "
                         << numeric);
            REQUIRE(rel_ok(gin.v[k], numeric));
        }
    }
}

Model one_layer(LayerSpec s, std::size_t c, std::size_t l,
                std::vector<std::vector<std::uint32_t>> ords = {}) {
    return Model({std::move(s)}, c, l, std::move(ords), "test", 0);
}

} // namespace

TEST_CASE("activation primitives and their output-form derivatives") {
    REQUIRE(act_apply(Act::identity, -2.5) == -2.5);
    REQUIRE(act_apply(Act::relu, -2.5) == 0.0);
    REQUIRE(act_apply(Act::relu, 1.25) == 1.25);
    REQUIRE(act_apply(Act::tanh_fn, 0.5) == Catch::Approx(std::tanh(0.5)));

    REQUIRE(act_grad_from_output(Act::identity, 7.0) == 1.0);
    REQUIRE(act_grad_from_output(Act::relu, 0.0) == 0.0);
    REQUIRE(act_grad_from_output(Act::relu, 3.0) == 1.0);
    double out = std::tanh(0.8);
    REQUIRE(act_grad_from_output(Act::tanh_fn, out) ==
            Catch::Approx(1.0 - out * out).epsilon(1e-12));
}

TEST_CASE("conv1d forward by hand") {
    LayerSpec s = layer(LayerKind::conv1d);
    s.out_channels = 1;
    s.kernel = 2;
    Model m = one_layer(s, 1, 4);
    m.params() = {1.0, -1.0, 0.25}; // w0, w1, bias
    Tensor x(1, 4);
    x.v = {5.0, 3.0, 2.0, 7.0};
    Tensor y = m.forward(x);
    REQUIRE(y.channels == 1);
    REQUIRE(y.length == 3);
    REQUIRE(y.v[0] == Catch::Approx(5.0 - 3.0 + 0.25));
    REQUIRE(y.v[1] == Catch::Approx(3.0 - 2.0 + 0.25));
    REQUIRE(y.v[2] == Catch::Approx(2.0 - 7.0 + 0.25));
}

TEST_CASE("conv1d with stride and padding matches the length rule") {
    LayerSpec s = layer(LayerKind::conv1d);
    s.out_channels = 3;
    s.kernel = 32;
    s.stride = 4;
    s.padding = 16;
    Model m = one_layer(s, 2, 64);
    REQUIRE(m.layers()[0].out_length == 64 / 4 + 1);

    // padded taps outside the input contribute nothing: an all-ones kernel
    // centered at the left edge sees only the taps that overlap the data
    LayerSpec t = layer(LayerKind::conv1d);
    t.out_channels = 1;
    t.kernel = 3;
    t.padding = 1;
    Model m2 = one_layer(t, 1, 3);
    m2.params() = {1.0, 1.0, 1.0, 0.0};
    Tensor x(1, 3);
    x.v = {1.0, 2.0, 4.0};
    Tensor y = m2.forward(x);
    REQUIRE(y.v[0] == 3.0); // left pad drops x[-1]
    REQUIRE(y.v[1] == 7.0);
    REQUIRE(y.v[2] == 6.0); // right pad drops x[3]
}

TEST_CASE("conv1d_transpose scatters kernel copies") {
    LayerSpec s = layer(LayerKind::conv1d_transpose);
    s.out_channels = 1;
    s.kernel = 3;
    s.stride = 2;
    Model m = one_layer(s, 1, 2);
    REQUIRE(m.layers()[0].out_length == 5); // (2-1)*2 + 3
    m.params() = {1.0, 2.0, 3.0, 0.0};
    Tensor x(1, 2);
    x.v = {10.0, 100.0};
    Tensor y = m.forward(x);
    REQUIRE(y.v == std::vector<double>{10.0, 20.0, 130.0, 200.0, 300.0});
}

TEST_CASE("transpose output padding and padding adjust the length") {
    LayerSpec s = layer(LayerKind::conv1d_transpose);
    s.out_channels = 1;
    s.kernel = 32;
    s.stride = 4;
    s.padding = 14;
    Model m = one_layer(s, 1, 17);
    REQUIRE(m.layers()[0].out_length == (17 - 1) * 4 + 32 - 28); // 68

    s.output_padding = 1;
    s.padding = 14;
    Model m2 = one_layer(s, 1, 17);
    REQUIRE(m2.layers()[0].out_length == 69);
}

TEST_CASE("conv2d forward by hand") {
    LayerSpec s = layer(LayerKind::conv2d);
    s.out_channels = 1;
    s.kernel = 2;
    Model m({s}, 1, 4, {}, "test", 0, 2, 2);
    m.params() = {1.0, 2.0, 3.0, 4.0, 0.5};
    Tensor x(1, 4);
    x.v = {1.0, 10.0, 100.0, 1000.0}; // row-major 2x2 plane
    Tensor y = m.forward(x);
    REQUIRE(y.length == 1);
    REQUIRE(y.v[0] == Catch::Approx(1.0 + 20.0 + 300.0 + 4000.0 + 0.5));
}

TEST_CASE("conv2d_transpose tiles disjoint kernel copies at stride two") {
    LayerSpec s = layer(LayerKind::conv2d_transpose);
    s.out_channels = 1;
    s.kernel = 2;
    s.stride = 2;
    Model m({s}, 1, 4, {}, "test", 0, 2, 2);
    REQUIRE(m.layers()[0].out_height == 4);
    REQUIRE(m.layers()[0].out_width == 4);
    m.params() = {1.0, 2.0, 3.0, 4.0, 0.0};
    Tensor x(1, 4);
    x.v = {1.0, 10.0, 100.0, 1000.0};
    Tensor y = m.forward(x);
    std::vector<double> want = {1.0,   2.0,   10.0,   20.0,   3.0,   4.0,   30.0,   40.0,
                                100.0, 200.0, 1000.0, 2000.0, 300.0, 400.0, 3000.0, 4000.0};
    REQUIRE(y.v == want);
}

TEST_CASE("fully connected flattens channel-major") {
    LayerSpec s = layer(LayerKind::fully_connected);
    s.out_features = 1;
    Model m = one_layer(s, 2, 2);
    // weights follow the flat layout c*L + i
    m.params() = {1.0, 10.0, 100.0, 1000.0, 0.0};
    Tensor x(2, 2);
    x.at(0, 0) = 1.0;
    x.at(0, 1) = 2.0;
    x.at(1, 0) = 3.0;
    x.at(1, 1) = 4.0;
    Tensor y = m.forward(x);
    REQUIRE(y.v[0] == Catch::Approx(1.0 + 20.0 + 300.0 + 4000.0));
}

TEST_CASE("permute gathers and inverse_permute scatters") {
    std::vector<std::uint32_t> ord = {2, 0, 3, 1};
    LayerSpec p = layer(LayerKind::permute);
    Model mp = one_layer(p, 1, 4, {ord});
    Tensor x(1, 4);
    x.v = {10.0, 11.0, 12.0, 13.0};
    Tensor y = mp.forward(x);
    REQUIRE(y.v == std::vector<double>{12.0, 10.0, 13.0, 11.0});

    LayerSpec ip = layer(LayerKind::inverse_permute);
    Model mi = one_layer(ip, 1, 4, {ord});
    Tensor z = mi.forward(y);
    REQUIRE(z.v == x.v); // exact, the values only move

    Model round({layer(LayerKind::permute), layer(LayerKind::inverse_permute)}, 2, 4, {ord},
                "test", 0);
    Rng rng(5);
    Tensor w = random_tensor(2, 4, rng);
    REQUIRE(round.forward(w).v == w.v);
}

TEST_CASE("sparse layers start as the identity map") {
    for (LayerKind k : {LayerKind::sparse1, LayerKind::sparse3}) {
        LayerSpec s = layer(k);
        s.has_bias = true;
        Model m = one_layer(s, 2, 6);
        Rng rng(3);
        m.init_params(rng);
        Tensor x = random_tensor(2, 6, rng);
        REQUIRE(m.forward(x).v == x.v); // center weight 1, neighbors and bias 0
    }
}

TEST_CASE("sparse3 couples only adjacent positions within a channel") {
    LayerSpec s = layer(LayerKind::sparse3);
    Model m = one_layer(s, 1, 3);
    // weights: center (1,1,1), right neighbor (0.5,0.5,0.5), left (0.25,...)
    m.params() = {1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.25, 0.25, 0.25};
    Tensor x(1, 3);
    x.v = {8.0, 2.0, 4.0};
    Tensor y = m.forward(x);
    REQUIRE(y.v[0] == Catch::Approx(8.0 + 0.5 * 2.0));              // no left neighbor
    REQUIRE(y.v[1] == Catch::Approx(2.0 + 0.5 * 4.0 + 0.25 * 8.0));
    REQUIRE(y.v[2] == Catch::Approx(4.0 + 0.25 * 2.0));             // no right neighbor
}

TEST_CASE("split then concat reassembles the channels") {
    LayerSpec sp = layer(LayerKind::split_channels);
    sp.split_at = 1;
    Model m({sp, layer(LayerKind::concat_channels)}, 3, 4, {}, "test", 0);
    Rng rng(8);
    Tensor x = random_tensor(3, 4, rng);
    REQUIRE(m.forward(x).v == x.v);
}

TEST_CASE("duplicate, transform, swap_top, concat orders branches") {
    LayerSpec sc = layer(LayerKind::sparse1);
    Model m({layer(LayerKind::duplicate), sc, layer(LayerKind::swap_top),
             layer(LayerKind::concat_channels)},
            1, 3, {}, "test", 0);
    // sparse1 scales the top copy by 2
    m.params() = {2.0, 2.0, 2.0};
    Tensor x(1, 3);
    x.v = {1.0, 2.0, 3.0};
    Tensor y = m.forward(x);
    REQUIRE(y.channels == 2);
    // swap_top put the scaled branch below, so it comes out first
    REQUIRE(y.v == std::vector<double>{2.0, 4.0, 6.0, 1.0, 2.0, 3.0});
}

TEST_CASE("sum_channels folds the two halves") {
    Model m({layer(LayerKind::sum_channels)}, 4, 2, {}, "test", 0);
    Tensor x(4, 2);
    x.v = {1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0};
    Tensor y = m.forward(x);
    REQUIRE(y.channels == 2);
    REQUIRE(y.v == std::vector<double>{11.0, 22.0, 33.0, 44.0});

    // odd channel counts are rejected when the model is assembled
    REQUIRE_THROWS_WITH((Model({layer(LayerKind::sum_channels)}, 3, 2, {}, "test", 0)),
                        Catch::Matchers::ContainsSubstring("sum_channels"));
}

TEST_CASE("replicate_channels repeats the whole block") {
    LayerSpec s = layer(LayerKind::replicate_channels);
    s.replicas = 3;
    Model m = one_layer(s, 2, 2);
    Tensor x(2, 2);
    x.v = {1.0, 2.0, 3.0, 4.0};
    Tensor y = m.forward(x);
    REQUIRE(y.channels == 6);
    REQUIRE(y.v == std::vector<double>{1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0, 1.0, 2.0,
                                       3.0, 4.0});
}

TEST_CASE("reshape renames dimensions without touching values") {
    LayerSpec s = layer(LayerKind::reshape);
    s.reshape_channels = 3;
    s.reshape_length = 2;
    Model m = one_layer(s, 2, 3);
    Rng rng(4);
    Tensor x = random_tensor(2, 3, rng);
    Tensor y = m.forward(x);
    REQUIRE(y.channels == 3);
    REQUIRE(y.length == 2);
    REQUIRE(y.v == x.v);

    s.reshape_length = 4;
    REQUIRE_THROWS_WITH(one_layer(s, 2, 3), Catch::Matchers::ContainsSubstring("reshape"));
}

TEST_CASE("gradients: every layer kind against central differences") {
    SECTION("sparse1 with bias and tanh") {
        LayerSpec s = layer(LayerKind::sparse1);
        s.has_bias = true;
        s.act = Act::tanh_fn;
        Model m = one_layer(s, 2, 5);
        check_gradients(m, 100);
    }
    SECTION("sparse3 with bias and tanh") {
        LayerSpec s = layer(LayerKind::sparse3);
        s.has_bias = true;
        s.act = Act::tanh_fn;
        Model m = one_layer(s, 2, 6);
        check_gradients(m, 200);
    }
    SECTION("conv1d stride two with padding") {
        LayerSpec s = layer(LayerKind::conv1d);
        s.out_channels = 3;
        s.kernel = 3;
        s.stride = 2;
        s.padding = 1;
        s.act = Act::tanh_fn;
        Model m = one_layer(s, 2, 9);
        check_gradients(m, 300);
    }
    SECTION("conv1d_transpose stride two with padding and output padding") {
        LayerSpec s = layer(LayerKind::conv1d_transpose);
        s.out_channels = 2;
        s.kernel = 3;
        s.stride = 2;
        s.padding = 1;
        s.output_padding = 1;
        s.act = Act::tanh_fn;
        Model m = one_layer(s, 3, 5);
        check_gradients(m, 400);
    }
    SECTION("conv2d") {
        LayerSpec s = layer(LayerKind::conv2d);
        s.out_channels = 2;
        s.kernel = 3;
        s.stride = 2;
        s.padding = 1;
        s.act = Act::tanh_fn;
        Model m({s}, 1, 16, {}, "test", 0, 4, 4);
        check_gradients(m, 500);
    }
    SECTION("conv2d_transpose") {
        LayerSpec s = layer(LayerKind::conv2d_transpose);
        s.out_channels = 1;
        s.kernel = 3;
        s.stride = 2;
        s.padding = 1;
        s.output_padding = 1;
        s.act = Act::tanh_fn;
        Model m({s}, 2, 9, {}, "test", 0, 3, 3);
        check_gradients(m, 600);
    }
    SECTION("fully connected with tanh") {
        LayerSpec s = layer(LayerKind::fully_connected);
        s.out_features = 4;
        s.act = Act::tanh_fn;
        Model m = one_layer(s, 2, 3);
        check_gradients(m, 700);
    }
    SECTION("activation with bias") {
        LayerSpec s = layer(LayerKind::activation);
        s.has_bias = true;
        s.act = Act::tanh_fn;
        Model m = one_layer(s, 2, 4);
        check_gradients(m, 800);
    }
    SECTION("permute and inverse_permute around a sparse core") {
        LayerSpec core = layer(LayerKind::sparse3);
        core.has_bias = true;
        core.act = Act::tanh_fn;
        Model m({layer(LayerKind::permute), core, layer(LayerKind::inverse_permute)}, 1, 6,
                {{3, 1, 5, 0, 2, 4}}, "test", 0);
        check_gradients(m, 900);
    }
    SECTION("split, transform, swap, concat") {
        LayerSpec sp = layer(LayerKind::split_channels);
        sp.split_at = 2;
        LayerSpec act = layer(LayerKind::activation);
        act.has_bias = true;
        act.act = Act::tanh_fn;
        Model m({sp, act, layer(LayerKind::swap_top), layer(LayerKind::concat_channels)}, 3,
                4, {}, "test", 0);
        check_gradients(m, 1000);
    }
    SECTION("duplicate, replicate, sum_channels") {
        LayerSpec rep = layer(LayerKind::replicate_channels);
        rep.replicas = 2;
        LayerSpec sc = layer(LayerKind::sparse1);
        sc.has_bias = true;
        sc.act = Act::tanh_fn;
        Model m({layer(LayerKind::duplicate), rep, sc, layer(LayerKind::sum_channels),
                 layer(LayerKind::concat_channels)},
                1, 4, {}, "test", 0);
        check_gradients(m, 1100);
    }
    SECTION("reshape inside a network") {
        LayerSpec rs = layer(LayerKind::reshape);
        rs.reshape_channels = 4;
        rs.reshape_length = 2;
        LayerSpec fc = layer(LayerKind::fully_connected);
        fc.out_features = 3;
        fc.act = Act::tanh_fn;
        Model m({rs, fc}, 2, 4, {}, "test", 0);
        check_gradients(m, 1200);
    }
    SECTION("relu network away from the kinks") {
        LayerSpec c = layer(LayerKind::conv1d);
        c.out_channels = 2;
        c.kernel = 3;
        c.padding = 1;
        c.act = Act::relu;
        LayerSpec fc = layer(LayerKind::fully_connected);
        fc.out_features = 3;
        fc.act = Act::relu;
        Model m({c, fc}, 1, 6, {}, "test", 0);
        check_gradients(m, 1300);
    }
}

TEST_CASE("gradients: presets at sixty-four nodes") {
    Rng og(77);
    auto ord = ident_ord(64);
    og.shuffle(ord);
    auto ord2 = ident_ord(64);
    Rng og2(78);
    og2.shuffle(ord2);

    SECTION("sfc1-nn") {
        PresetConfig c;
        c.name = "sfc1-nn";
        c.n_nodes = 64;
        c.latent = 8;
        c.orderings = {ord};
        Model m = build_preset(c);
        check_gradients(m, 2000, 2);
    }
    SECTION("sfc1-nn two channels") {
        PresetConfig c;
        c.name = "sfc1-nn";
        c.n_nodes = 64;
        c.n_channels = 2;
        c.latent = 8;
        c.orderings = {ord};
        Model m = build_preset(c);
        check_gradients(m, 2100, 2);
    }
    SECTION("sfc2-nn") {
        PresetConfig c;
        c.name = "sfc2-nn";
        c.n_nodes = 64;
        c.latent = 8;
        c.orderings = {ord, ord2};
        Model m = build_preset(c);
        check_gradients(m, 2200, 2);
    }
    SECTION("classical2d") {
        PresetConfig c;
        c.name = "classical2d";
        c.n_nodes = 64;
        c.latent = 8;
        c.grid_nx = 8;
        c.grid_ny = 8;
        Model m = build_preset(c);
        check_gradients(m, 2300, 2);
    }
}

TEST_CASE("preset shapes at the published sizes") {
    SECTION("single-curve network at 16384 nodes") {
        PresetConfig c;
        c.name = "sfc1-nn";
        c.n_nodes = 16384;
        c.latent = 64;
        c.orderings = {ident_ord(16384)};
        Model m = build_preset(c);
        // encoder: four stride-four stages, then a 16 x 65 flatten
        bool saw_flatten = false;
        for (const auto& l : m.layers())
            if (l.kind == LayerKind::reshape && l.reshape_length == 1040) saw_flatten = true;
        REQUIRE(saw_flatten);
        REQUIRE(m.layers()[m.bottleneck_layer()].out_features == 64);
        Rng rng(1);
        m.init_params(rng);
        Tensor x = random_tensor(1, 16384, rng, 0.0, 1.0);
        Tensor y = m.forward(x);
        REQUIRE(y.channels == 1);
        REQUIRE(y.length == 16384);
    }
    SECTION("double-curve network at 16384 nodes") {
        PresetConfig c;
        c.name = "sfc2-nn";
        c.n_nodes = 16384;
        c.latent = 64;
        c.orderings = {ident_ord(16384), ident_ord(16384)};
        Model m = build_preset(c);
        bool saw_concat_flatten = false, saw_dec_fc = false;
        for (const auto& l : m.layers()) {
            if (l.kind == LayerKind::fully_connected && l.in_features == 2080)
                saw_concat_flatten = true;
            if (l.kind == LayerKind::fully_connected && l.out_features == 2048)
                saw_dec_fc = true;
        }
        REQUIRE(saw_concat_flatten);
        REQUIRE(saw_dec_fc);
    }
    SECTION("double-curve network at 1024 nodes") {
        PresetConfig c;
        c.name = "sfc2-nn";
        c.n_nodes = 1024;
        c.latent = 16;
        c.orderings = {ident_ord(1024), ident_ord(1024)};
        Model m = build_preset(c);
        bool saw_branch_flatten = false, saw_fc_in = false, saw_dec_reshape = false;
        for (const auto& l : m.layers()) {
            if (l.kind == LayerKind::reshape && l.reshape_length == 136)
                saw_branch_flatten = true;
            if (l.kind == LayerKind::fully_connected && l.in_features == 272) saw_fc_in = true;
            if (l.kind == LayerKind::reshape && l.reshape_channels == 16 &&
                l.reshape_length == 16)
                saw_dec_reshape = true;
        }
        REQUIRE(saw_branch_flatten);
        REQUIRE(saw_fc_in);
        REQUIRE(saw_dec_reshape);
        Rng rng(2);
        m.init_params(rng);
        Tensor x = random_tensor(1, 1024, rng, 0.0, 1.0);
        REQUIRE(m.forward(x).length == 1024);
    }
    SECTION("non-power-of-four node counts still reconstruct their length") {
        PresetConfig c;
        c.name = "sfc1-nn";
        c.n_nodes = 150;
        c.latent = 8;
        c.orderings = {ident_ord(150)};
        Model m = build_preset(c);
        Rng rng(3);
        m.init_params(rng);
        Tensor x = random_tensor(1, 150, rng, 0.0, 1.0);
        REQUIRE(m.forward(x).length == 150);
    }
    SECTION("preset validation errors") {
        PresetConfig c;
        c.name = "nope";
        c.n_nodes = 64;
        c.latent = 8;
        REQUIRE_THROWS_WITH(build_preset(c), Catch::Matchers::ContainsSubstring("sfc1-nn"));
        c.name = "sfc2-nn";
        REQUIRE_THROWS_WITH(build_preset(c),
                            Catch::Matchers::ContainsSubstring("2 ordering"));
        c.name = "sfc2-nn";
        c.n_channels = 2;
        c.orderings = {ident_ord(64), ident_ord(64)};
        REQUIRE_THROWS_AS(build_preset(c), std::invalid_argument);
        PresetConfig g;
        g.name = "classical2d";
        g.n_nodes = 60;
        g.latent = 8;
        g.grid_nx = 12;
        g.grid_ny = 5; // odd: one stride-two stage cannot halve it
        REQUIRE_THROWS_AS(build_preset(g), std::invalid_argument);
        g.grid_ny = 6; // 12 * 6 != 60
        REQUIRE_THROWS_AS(build_preset(g), std::invalid_argument);
    }
}

TEST_CASE("shape errors name the offending layer") {
    LayerSpec p = layer(LayerKind::permute);
    REQUIRE_THROWS_WITH(one_layer(p, 1, 5, {{0, 1, 2, 3}}),
                        Catch::Matchers::ContainsSubstring("layer 0 (permute)"));
    LayerSpec cat = layer(LayerKind::concat_channels);
    REQUIRE_THROWS_WITH(one_layer(cat, 1, 5),
                        Catch::Matchers::ContainsSubstring("concat_channels"));
    LayerSpec fc = layer(LayerKind::fully_connected);
    fc.out_features = 0;
    REQUIRE_THROWS_WITH(one_layer(fc, 1, 5),
                        Catch::Matchers::ContainsSubstring("out_features"));
}

TEST_CASE("eval_mse measures magnitudes for two channels, values otherwise") {
    Tensor pred1(1, 2), tgt1(1, 2);
    tgt1.v = {1.0, 3.0};
    REQUIRE(eval_mse(pred1, tgt1) == Catch::Approx(5.0)); // (1 + 9) / 2
    REQUIRE(plain_mse(pred1, tgt1) == Catch::Approx(5.0));

    Tensor pred2(2, 2), tgt2(2, 2);
    tgt2.at(0, 0) = 3.0;
    tgt2.at(1, 0) = 4.0; // magnitude 5 at node 0, 0 at node 1
    REQUIRE(eval_mse(pred2, tgt2) == Catch::Approx(12.5)); // 25 / 2
    REQUIRE(plain_mse(pred2, tgt2) == Catch::Approx(6.25)); // 25 / 4
}

TEST_CASE("adam takes a signed first step") {
    LayerSpec fc = layer(LayerKind::fully_connected);
    fc.out_features = 1;
    Model m({fc}, 1, 1, {}, "test", 1);
    m.params() = {0.3, 0.0}; // weight, bias

    SnapshotSet set = SnapshotSet::empty(1, 1);
    set.examples = {{0.5}};
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 1;
    cfg.learning_rate = 1e-4;
    auto history = train_model(m, set, cfg);

    // residual 0.3*0.5 - 0.5 = -0.35; gradients (2*d*x, 2*d) = (-0.35, -0.7)
    double gw = -0.35, gb = -0.7;
    double eps = 1e-8;
    REQUIRE(m.params()[0] ==
            Catch::Approx(0.3 - 1e-4 * gw / (std::abs(gw) + eps)).epsilon(1e-10));
    REQUIRE(m.params()[1] ==
            Catch::Approx(0.0 - 1e-4 * gb / (std::abs(gb) + eps)).epsilon(1e-10));
    REQUIRE(history.size() == 1);
    REQUIRE(history[0].train_mse == Catch::Approx(0.1225)); // pre-update loss
    REQUIRE(history[0].val_mse == history[0].train_mse);    // no val split
}

TEST_CASE("training is reproducible and epoch accounting is exact") {
    PresetConfig c;
    c.name = "sfc1-nn";
    c.n_nodes = 64;
    c.latent = 4;
    c.orderings = {ident_ord(64)};

    SnapshotSet set = SnapshotSet::empty(64, 1);
    Rng data_rng(50);
    for (int e = 0; e < 12; ++e) {
        std::vector<double> ex(64);
        for (double& v : ex) v = data_rng.uniform(0.0, 1.0);
        set.examples.push_back(ex);
    }
    set.split.assign(12, 0);
    set.split[9] = set.split[10] = 1;
    set.split[11] = 2;

    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 11;

    auto run = [&]() {
        Model m = build_preset(c);
        Rng init(99);
        m.init_params(init);
        auto hist = train_model(m, set, cfg);
        return std::make_pair(m.params(), hist);
    };
    auto [p1, h1] = run();
    auto [p2, h2] = run();
    REQUIRE(p1 == p2); // bitwise
    REQUIRE(h1.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(h1[i].train_mse == h2[i].train_mse);
        REQUIRE(h1[i].val_mse == h2[i].val_mse);
        REQUIRE(std::isfinite(h1[i].train_mse));
    }

    // zero epochs trains nothing
    Model m0 = build_preset(c);
    Rng init(99);
    m0.init_params(init);
    auto params_before = m0.params();
    TrainConfig none = cfg;
    none.epochs = 0;
    REQUIRE(train_model(m0, set, none).empty());
    REQUIRE(m0.params() == params_before);

    // a different train seed shuffles differently
    TrainConfig other = cfg;
    other.seed = 12;
    Model m3 = build_preset(c);
    Rng init3(99);
    m3.init_params(init3);
    auto h3 = train_model(m3, set, other);
    REQUIRE(h3.back().train_mse != h1.back().train_mse);
}

TEST_CASE("encode plus decode equals forward") {
    PresetConfig c;
    c.name = "sfc1-nn";
    c.n_nodes = 64;
    c.latent = 6;
    c.orderings = {ident_ord(64)};
    Model m = build_preset(c);
    Rng rng(21);
    m.init_params(rng);
    Tensor x = random_tensor(1, 64, rng, 0.0, 1.0);
    Tensor code = m.encode(x);
    REQUIRE(code.channels == 1);
    REQUIRE(code.length == 6);
    Tensor via_split = m.decode(code);
    Tensor direct = m.forward(x);
    REQUIRE(via_split.v == direct.v); // identical op sequence, bitwise equal

    REQUIRE_THROWS_AS(m.decode(Tensor(1, 5)), std::invalid_argument);

    LayerSpec act = layer(LayerKind::activation);
    Model no_bn = one_layer(act, 1, 4);
    REQUIRE_THROWS_AS(no_bn.encode(Tensor(1, 4)), std::logic_error);
}

TEST_CASE("non-finite gradients abort with context") {
    LayerSpec fc = layer(LayerKind::fully_connected);
    fc.out_features = 1;
    Model m({fc}, 1, 2, {}, "test", 1);
    m.params() = {1.0, 1.0, 0.0};
    SnapshotSet set = SnapshotSet::empty(2, 1);
    set.examples = {{std::numeric_limits<double>::quiet_NaN(), 0.0}};
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 1;
    REQUIRE_THROWS_WITH(train_model(m, set, cfg),
                        Catch::Matchers::ContainsSubstring("non-finite gradient") &&
                            Catch::Matchers::ContainsSubstring("epoch 1"));
}

TEST_CASE("model files round-trip bitwise") {
    PresetConfig c;
    c.name = "sfc2-nn";
    c.n_nodes = 64;
    c.latent = 8;
    Rng og(31);
    auto o1 = ident_ord(64), o2 = ident_ord(64);
    og.shuffle(o1);
    og.shuffle(o2);
    c.orderings = {o1, o2};
    Model m = build_preset(c);
    Rng rng(77);
    m.init_params(rng);

    TempFile f("model");
    save_model(f.path, m);
    Model back = load_model(f.path);
    REQUIRE(back.preset_name() == m.preset_name());
    REQUIRE(back.latent() == m.latent());
    REQUIRE(back.in_channels() == m.in_channels());
    REQUIRE(back.in_length() == m.in_length());
    REQUIRE(back.param_count() == m.param_count());
    REQUIRE(back.params() == m.params());
    REQUIRE(back.orderings() == m.orderings());
    REQUIRE(back.bottleneck_layer() == m.bottleneck_layer());
    REQUIRE(back.layers().size() == m.layers().size());
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
        REQUIRE(back.layers()[l].kind == m.layers()[l].kind);
        REQUIRE(back.layers()[l].act == m.layers()[l].act);
        REQUIRE(back.layers()[l].out_length == m.layers()[l].out_length);
    }
    Tensor x = random_tensor(1, 64, rng, 0.0, 1.0);
    REQUIRE(back.forward(x).v == m.forward(x).v);

    {
        std::ofstream out(f.path, std::ios::binary | std::ios::trunc);
        out.write("XXXX", 4);
    }
    REQUIRE_THROWS_AS(load_model(f.path), std::runtime_error);
}

TEST_CASE("loss history lands in the csv with full precision") {
    TempFile f("loss");
    std::vector<EpochStats> hist{{0.5, 0.25}, {1.0 / 3.0, 0.125}};
    write_loss_csv(f.path, hist);
    std::ifstream in(f.path);
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "epoch,train_mse,val_mse");
    std::getline(in, line);
    REQUIRE(line.substr(0, 2) == "1,");
    std::getline(in, line);
    REQUIRE(line.find("0.3333333333333333") != std::string::npos);
}
