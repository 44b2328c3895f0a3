// Command line front end: builds adjacency graphs from meshes or grids,
// computes curve orderings, generates advection snapshot data, trains the
// autoencoder presets, and evaluates them against the low-rank baseline.
// Every command writes a JSON run manifest next to its primary output.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "curveweave/datagen.hpp"
#include "curveweave/graph.hpp"
#include "curveweave/hilbert.hpp"
#include "curveweave/mesh.hpp"
#include "curveweave/nn.hpp"
#include "curveweave/ordering.hpp"
#include "curveweave/presets.hpp"
#include "curveweave/rng.hpp"
#include "curveweave/sfc.hpp"
#include "curveweave/svd.hpp"
#include "curveweave/train.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

std::chrono::steady_clock::time_point g_start;
std::vector<std::string> g_argv;

void ensure_parent_dir(const std::string& path) {
    fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

void write_manifest(const std::string& path, const std::string& command, const json& config,
                    std::uint64_t seed, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["argv"] = g_argv;
    m["config"] = config;
    m["seed"] = seed;
    m["inputs"] = inputs;
    m["outputs"] = outputs;
    m["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - g_start).count();
    m["versions"] = {{"curveweave", kVersion},
                     {"snapshot_format", "SNP1"},
                     {"model_format", "CWM1"}};
    ensure_parent_dir(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << m.dump(2) << "\n";
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// --- graph build ---------------------------------------------------------

struct GraphBuildOpts {
    std::string mesh_path;
    std::vector<std::size_t> grid;
    std::string out;
};

void run_graph_build(const GraphBuildOpts& o) {
    if (o.mesh_path.empty() == o.grid.empty())
        throw CLI::ValidationError("graph build",
                                   "give exactly one of --mesh <file> or --grid NX NY");
    curveweave::Graph g;
    json cfg;
    std::vector<std::string> inputs;
    if (!o.mesh_path.empty()) {
        curveweave::Mesh mesh = curveweave::load_mesh(o.mesh_path);
        g = curveweave::build_mesh_graph(mesh);
        cfg["mesh"] = o.mesh_path;
        cfg["discretization"] = curveweave::to_string(mesh.discretization);
        inputs.push_back(o.mesh_path);
    } else {
        g = curveweave::build_grid_graph(o.grid[0], o.grid[1]);
        cfg["grid"] = {o.grid[0], o.grid[1]};
    }
    ensure_parent_dir(o.out);
    curveweave::save_graph(o.out, g);
    cfg["vertices"] = g.vertex_count();
    cfg["edges"] = g.edge_count();
    write_manifest(o.out + ".manifest.json", "graph build", cfg, 0, inputs, {o.out});
    std::cout << "graph with " << g.vertex_count() << " vertices, " << g.edge_count()
              << " edges -> " << o.out << "\n";
}

// --- sfc build -----------------------------------------------------------

struct SfcBuildOpts {
    std::string graph_path;
    std::uint64_t seed = 0;
    std::size_t count = 1;
    double gamma = 0.2;
    std::size_t sweeps = 10;
    std::string out_prefix;
};

void run_sfc_build(const SfcBuildOpts& o) {
    curveweave::Graph g = curveweave::load_graph(o.graph_path);
    curveweave::Rng rng(o.seed);
    curveweave::SfcBuildConfig cfg;
    cfg.sweeps = o.sweeps;
    auto orderings = curveweave::build_multiple_sfcs(g, o.count, rng, o.gamma, cfg);

    ensure_parent_dir(o.out_prefix);
    std::vector<std::string> outputs;
    for (std::size_t m = 0; m < orderings.size(); ++m) {
        std::string path = o.out_prefix + "_" + std::to_string(m) + ".sfc";
        curveweave::save_ordering(path, orderings[m]);
        outputs.push_back(path);
    }
    std::string cost_path = o.out_prefix + "_cost.csv";
    {
        std::ofstream out(cost_path);
        if (!out) throw std::runtime_error("cannot open '" + cost_path + "' for writing");
        out << "curve,cost\n";
        for (std::size_t m = 0; m < orderings.size(); ++m)
            out << m << "," << curveweave::sfc_total_cost(g, orderings[m]) << "\n";
    }
    outputs.push_back(cost_path);
    std::string cov_path = o.out_prefix + "_coverage.csv";
    {
        auto rep = curveweave::edge_coverage(g, orderings);
        std::ofstream out(cov_path);
        if (!out) throw std::runtime_error("cannot open '" + cov_path + "' for writing");
        curveweave::write_coverage_csv(out, rep);
    }
    outputs.push_back(cov_path);

    json cfg_json = {{"graph", o.graph_path}, {"count", o.count},   {"gamma", o.gamma},
                     {"sweeps", o.sweeps},    {"out_prefix", o.out_prefix}};
    write_manifest(o.out_prefix + "_manifest.json", "sfc build", cfg_json, o.seed,
                   {o.graph_path}, outputs);
    for (std::size_t m = 0; m < orderings.size(); ++m)
        std::cout << "curve " << m << " cost " << curveweave::sfc_total_cost(g, orderings[m])
                  << "\n";
}

// --- sfc hilbert ---------------------------------------------------------

struct SfcHilbertOpts {
    unsigned level = 1;
    unsigned rotate = 0;
    std::string out;
};

void run_sfc_hilbert(const SfcHilbertOpts& o) {
    curveweave::SfcOrdering ord = curveweave::hilbert_ordering(o.level);
    std::size_t n = static_cast<std::size_t>(1) << o.level;
    if (o.rotate % 4 != 0) ord = curveweave::rotate_ordering(ord, n, o.rotate % 4);
    ensure_parent_dir(o.out);
    curveweave::save_ordering(o.out, ord);
    json cfg = {{"level", o.level}, {"rotate", o.rotate % 4}, {"grid", {n, n}}};
    write_manifest(o.out + ".manifest.json", "sfc hilbert", cfg, 0, {}, {o.out});
    std::cout << "hilbert ordering of " << ord.size() << " cells -> " << o.out << "\n";
}

// --- sfc cost ------------------------------------------------------------

struct SfcCostOpts {
    std::string graph_path;
    std::string ordering_path;
    std::string out;
};

void run_sfc_cost(const SfcCostOpts& o) {
    curveweave::Graph g = curveweave::load_graph(o.graph_path);
    curveweave::SfcOrdering ord = curveweave::load_ordering(o.ordering_path);
    std::uint64_t cost = curveweave::sfc_total_cost(g, ord);
    std::cout << cost << "\n";
    if (!o.out.empty()) {
        ensure_parent_dir(o.out);
        std::ofstream out(o.out);
        if (!out) throw std::runtime_error("cannot open '" + o.out + "' for writing");
        out << "cost\n" << cost << "\n";
        json cfg = {{"graph", o.graph_path}, {"ordering", o.ordering_path}};
        write_manifest(o.out + ".manifest.json", "sfc cost", cfg, 0,
                       {o.graph_path, o.ordering_path}, {o.out});
    }
}

// --- data ----------------------------------------------------------------

struct DataOpts {
    std::string preset = "desk";
    std::uint64_t seed = 0;
    std::string out;
};

void run_data(const std::string& kind, const DataOpts& o) {
    curveweave::SnapshotSet set;
    json cfg;
    if (kind == "square") {
        curveweave::AdvectionConfig ac = o.preset == "paper"
                                             ? curveweave::AdvectionConfig::full(o.seed)
                                             : curveweave::AdvectionConfig::desk(o.seed);
        set = curveweave::generate_square_wave(ac);
        cfg = {{"kind", "square"},        {"preset", o.preset},
               {"grid", {ac.nx, ac.ny}},  {"initial_conditions", ac.n_initial},
               {"steps", ac.n_steps},     {"dt", ac.dt},
               {"velocity", {ac.u, ac.v}}};
    } else {
        curveweave::GaussianConfig gc = o.preset == "paper"
                                            ? curveweave::GaussianConfig::full(o.seed)
                                            : curveweave::GaussianConfig::desk(o.seed);
        set = curveweave::generate_gaussians(gc);
        cfg = {{"kind", "gauss"},
               {"preset", o.preset},
               {"grid", {gc.nx, gc.ny}},
               {"samples", gc.n_samples},
               {"sigma", {gc.sigma_lo, gc.sigma_hi}}};
    }
    set = curveweave::normalize(std::move(set), 0.0, 1.0);
    curveweave::Rng split_rng = curveweave::Rng(o.seed).derive(0x73706c69);
    set = curveweave::split(std::move(set), 6.0, 2.0, 2.0, split_rng);
    cfg["normalize"] = {0.0, 1.0};
    cfg["split"] = {6, 2, 2};
    cfg["examples"] = set.n_examples();
    ensure_parent_dir(o.out);
    curveweave::save_snapshots(o.out, set);
    write_manifest(o.out + ".manifest.json", "data " + kind, cfg, o.seed, {}, {o.out});
    std::cout << set.n_examples() << " examples on " << set.n_nodes << " nodes -> " << o.out
              << "\n";
}

// --- train ---------------------------------------------------------------

struct TrainOpts {
    std::string data_path;
    std::string preset;
    std::string ordering_path;
    std::string ordering2_path;
    std::size_t latent = 16;
    std::size_t epochs = 500;
    std::size_t batch = 64;
    double lr = 1e-4;
    std::uint64_t seed = 0;
    std::vector<std::size_t> grid;
    std::string out_dir;
};

void run_train(const TrainOpts& o) {
    curveweave::SnapshotSet set = curveweave::load_snapshots(o.data_path);
    std::vector<std::string> inputs = {o.data_path};

    curveweave::PresetConfig pc;
    pc.name = o.preset;
    pc.n_nodes = set.n_nodes;
    pc.n_channels = set.n_channels;
    pc.latent = o.latent;
    const bool needs_one = o.preset == "sfc1" || o.preset == "sfc1-nn";
    const bool needs_two = o.preset == "sfc2" || o.preset == "sfc2-nn";
    if (needs_one || needs_two) {
        if (o.ordering_path.empty())
            throw CLI::ValidationError("train", "preset '" + o.preset + "' needs --ordering");
        pc.orderings.push_back(curveweave::load_ordering(o.ordering_path).to_vertex);
        inputs.push_back(o.ordering_path);
    }
    if (needs_two) {
        if (o.ordering2_path.empty())
            throw CLI::ValidationError("train", "preset '" + o.preset + "' needs --ordering2");
        pc.orderings.push_back(curveweave::load_ordering(o.ordering2_path).to_vertex);
        inputs.push_back(o.ordering2_path);
    }
    if (o.preset == "classical2d") {
        if (o.grid.size() == 2) {
            pc.grid_nx = o.grid[0];
            pc.grid_ny = o.grid[1];
        } else {
            auto side = static_cast<std::size_t>(std::llround(std::sqrt(
                static_cast<double>(set.n_nodes))));
            if (side * side != set.n_nodes)
                throw CLI::ValidationError(
                    "train", "classical2d on a non-square node count needs --grid NX NY");
            pc.grid_nx = pc.grid_ny = side;
        }
    }

    curveweave::Model model = curveweave::build_preset(pc);
    curveweave::Rng init_rng = curveweave::Rng(o.seed).derive(0x696e6974);
    model.init_params(init_rng);

    curveweave::TrainConfig tc;
    tc.epochs = o.epochs;
    tc.batch_size = o.batch;
    tc.learning_rate = o.lr;
    tc.seed = o.seed;
    auto history = curveweave::train_model(model, set, tc);

    fs::create_directories(o.out_dir);
    std::string model_path = (fs::path(o.out_dir) / "model.cwm").string();
    std::string loss_path = (fs::path(o.out_dir) / "loss.csv").string();
    curveweave::save_model(model_path, model);
    curveweave::write_loss_csv(loss_path, history);

    json cfg = {{"data", o.data_path},   {"preset", o.preset}, {"latent", o.latent},
                {"epochs", o.epochs},    {"batch", o.batch},   {"learning_rate", o.lr},
                {"parameters", model.param_count()}};
    if (!o.ordering_path.empty()) cfg["ordering"] = o.ordering_path;
    if (!o.ordering2_path.empty()) cfg["ordering2"] = o.ordering2_path;
    if (pc.grid_nx != 0) cfg["grid"] = {pc.grid_nx, pc.grid_ny};
    write_manifest((fs::path(o.out_dir) / "manifest.json").string(), "train", cfg, o.seed,
                   inputs, {model_path, loss_path});
    if (!history.empty())
        std::cout << "final train mse " << fmt17(history.back().train_mse) << ", val mse "
                  << fmt17(history.back().val_mse) << "\n";
    std::cout << "model -> " << model_path << "\n";
}

// --- svd -----------------------------------------------------------------

struct SvdOpts {
    std::string data_path;
    std::vector<std::size_t> ranks;
    std::string out;
};

void run_svd(const SvdOpts& o) {
    curveweave::SnapshotSet set = curveweave::load_snapshots(o.data_path);
    if (set.split.empty())
        throw std::runtime_error("dataset '" + o.data_path +
                                 "' has no train/val/test split; regenerate it first");
    curveweave::Mat train = curveweave::snapshot_matrix(set, 0);
    curveweave::Mat val = curveweave::snapshot_matrix(set, 1);
    curveweave::Mat test = curveweave::snapshot_matrix(set, 2);
    if (train.cols == 0) throw std::runtime_error("dataset has no training examples");
    curveweave::SvdResult f = curveweave::svd(train);

    ensure_parent_dir(o.out);
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot open '" + o.out + "' for writing");
    out << "rank,train_mse,val_mse,test_mse\n";
    for (std::size_t r : o.ranks) {
        if (r > f.sigma.size())
            throw std::runtime_error("rank " + std::to_string(r) + " exceeds the " +
                                     std::to_string(f.sigma.size()) + " available modes");
        out << r << "," << fmt17(curveweave::projection_mse(f, r, train)) << ","
            << fmt17(curveweave::projection_mse(f, r, val)) << ","
            << fmt17(curveweave::projection_mse(f, r, test)) << "\n";
    }
    out.close();
    json cfg = {{"data", o.data_path}, {"ranks", o.ranks}, {"modes", f.sigma.size()}};
    write_manifest(o.out + ".manifest.json", "svd", cfg, 0, {o.data_path}, {o.out});
    std::cout << "singular value baseline over " << o.ranks.size() << " ranks -> " << o.out
              << "\n";
}

// --- compare -------------------------------------------------------------

struct CompareOpts {
    std::string model_dir;
    std::string data_path;
    std::string svd_csv;
    std::string out;
};

double svd_val_mse_at_rank(const std::string& path, std::size_t rank) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("rank,", 0) != 0)
        throw std::runtime_error("'" + path + "' is not a rank table");
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        if (static_cast<std::size_t>(std::stoull(cell)) != rank) continue;
        std::getline(row, cell, ','); // train
        std::getline(row, cell, ','); // val
        return std::stod(cell);
    }
    throw std::runtime_error("'" + path + "' has no row for rank " + std::to_string(rank));
}

void run_compare(const CompareOpts& o) {
    std::string model_path = (fs::path(o.model_dir) / "model.cwm").string();
    curveweave::Model model = curveweave::load_model(model_path);
    curveweave::SnapshotSet set = curveweave::load_snapshots(o.data_path);
    double train = curveweave::evaluate_split(model, set, 0);
    double val = curveweave::evaluate_split(model, set, 1);
    double test = curveweave::evaluate_split(model, set, 2);
    double svd_mse = svd_val_mse_at_rank(o.svd_csv, model.latent());

    ensure_parent_dir(o.out);
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot open '" + o.out + "' for writing");
    out << "model,latent,train_mse,val_mse,test_mse,svd_mse\n";
    out << model.preset_name() << "," << model.latent() << "," << fmt17(train) << ","
        << fmt17(val) << "," << fmt17(test) << "," << fmt17(svd_mse) << "\n";
    out.close();
    json cfg = {{"model", model_path}, {"data", o.data_path}, {"svd", o.svd_csv},
                {"preset", model.preset_name()}, {"latent", model.latent()}};
    write_manifest(o.out + ".manifest.json", "compare", cfg, 0,
                   {model_path, o.data_path, o.svd_csv}, {o.out});
    std::cout << model.preset_name() << " latent " << model.latent() << ": val mse "
              << fmt17(val) << " vs baseline " << fmt17(svd_mse) << "\n";
}

// --- field-error ---------------------------------------------------------

struct FieldErrorOpts {
    std::string model_dir;
    std::string data_path;
    std::size_t example = 0;
    std::string out;
};

void run_field_error(const FieldErrorOpts& o) {
    std::string model_path = (fs::path(o.model_dir) / "model.cwm").string();
    curveweave::Model model = curveweave::load_model(model_path);
    curveweave::SnapshotSet set = curveweave::load_snapshots(o.data_path);
    if (o.example >= set.n_examples())
        throw std::runtime_error("example " + std::to_string(o.example) +
                                 " out of range; dataset has " +
                                 std::to_string(set.n_examples()) + " examples");
    curveweave::Tensor x = curveweave::example_tensor(set, o.example);
    curveweave::Tensor y = model.forward(x);

    ensure_parent_dir(o.out);
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot open '" + o.out + "' for writing");
    const std::size_t C = x.channels;
    out << "node";
    for (std::size_t c = 0; c < C; ++c) out << ",target_" << c;
    for (std::size_t c = 0; c < C; ++c) out << ",prediction_" << c;
    out << ",error\n";
    for (std::size_t i = 0; i < x.length; ++i) {
        out << i;
        for (std::size_t c = 0; c < C; ++c) out << "," << fmt17(x.at(c, i));
        for (std::size_t c = 0; c < C; ++c) out << "," << fmt17(y.at(c, i));
        double err;
        if (C == 2)
            err = std::hypot(y.at(0, i), y.at(1, i)) - std::hypot(x.at(0, i), x.at(1, i));
        else
            err = y.at(0, i) - x.at(0, i);
        out << "," << fmt17(err) << "\n";
    }
    out.close();
    json cfg = {{"model", model_path}, {"data", o.data_path}, {"example", o.example}};
    write_manifest(o.out + ".manifest.json", "field-error", cfg, 0, {model_path, o.data_path},
                   {o.out});
    std::cout << "field error of example " << o.example << " -> " << o.out << "\n";
}

} // namespace

int main(int argc, char** argv) {
    g_start = std::chrono::steady_clock::now();
    for (int i = 0; i < argc; ++i) g_argv.emplace_back(argv[i]);

    CLI::App app{"curve orderings and convolutional autoencoders for simulation fields"};
    app.require_subcommand(1);

    // graph
    auto* graph = app.add_subcommand("graph", "adjacency graph tools");
    graph->require_subcommand(1);
    GraphBuildOpts gb;
    auto* graph_build = graph->add_subcommand("build", "build a graph from a mesh or grid");
    graph_build->add_option("--mesh", gb.mesh_path, "mesh file");
    graph_build->add_option("--grid", gb.grid, "structured grid dimensions NX NY")
        ->expected(2);
    graph_build->add_option("--out", gb.out, "output graph file")->required();
    graph_build->callback([&] { run_graph_build(gb); });

    // sfc
    auto* sfc = app.add_subcommand("sfc", "space filling curve tools");
    sfc->require_subcommand(1);
    SfcBuildOpts sb;
    auto* sfc_build = sfc->add_subcommand("build", "compute curve orderings of a graph");
    sfc_build->add_option("--graph", sb.graph_path, "input graph file")->required();
    sfc_build->add_option("--seed", sb.seed, "random seed")->required();
    sfc_build->add_option("--count", sb.count, "number of curves")->default_val(1);
    sfc_build->add_option("--gamma", sb.gamma, "reweighting exponent for later curves")
        ->default_val(0.2);
    sfc_build->add_option("--sweeps", sb.sweeps, "window sweep rounds per level")
        ->default_val(10);
    sfc_build->add_option("--out-prefix", sb.out_prefix, "output path prefix")->required();
    sfc_build->callback([&] { run_sfc_build(sb); });

    SfcHilbertOpts sh;
    auto* sfc_hilbert = sfc->add_subcommand("hilbert", "reference curve on a 2^K x 2^K grid");
    sfc_hilbert->add_option("--level", sh.level, "refinement level K")->required();
    sfc_hilbert->add_option("--rotate", sh.rotate, "quarter turns clockwise")->default_val(0);
    sfc_hilbert->add_option("--out", sh.out, "output ordering file")->required();
    sfc_hilbert->callback([&] { run_sfc_hilbert(sh); });

    SfcCostOpts sc;
    auto* sfc_cost = sfc->add_subcommand("cost", "traversal cost of an ordering on a graph");
    sfc_cost->add_option("--graph", sc.graph_path, "input graph file")->required();
    sfc_cost->add_option("--ordering", sc.ordering_path, "ordering file")->required();
    sfc_cost->add_option("--out", sc.out, "optional CSV output");
    sfc_cost->callback([&] { run_sfc_cost(sc); });

    // data
    auto* data = app.add_subcommand("data", "snapshot dataset generators");
    data->require_subcommand(1);
    DataOpts dsq, dga;
    auto* data_square = data->add_subcommand("square", "advected square wave snapshots");
    data_square->add_option("--preset", dsq.preset, "problem size")
        ->check(CLI::IsMember({"desk", "paper"}))
        ->default_val("desk");
    data_square->add_option("--seed", dsq.seed, "random seed")->required();
    data_square->add_option("--out", dsq.out, "output snapshot file")->required();
    data_square->callback([&] { run_data("square", dsq); });
    auto* data_gauss = data->add_subcommand("gauss", "random gaussian bump snapshots");
    data_gauss->add_option("--preset", dga.preset, "problem size")
        ->check(CLI::IsMember({"desk", "paper"}))
        ->default_val("desk");
    data_gauss->add_option("--seed", dga.seed, "random seed")->required();
    data_gauss->add_option("--out", dga.out, "output snapshot file")->required();
    data_gauss->callback([&] { run_data("gauss", dga); });

    // train
    TrainOpts tr;
    auto* train = app.add_subcommand("train", "train an autoencoder preset");
    train->add_option("--data", tr.data_path, "snapshot file")->required();
    train->add_option("--preset", tr.preset, "architecture preset")
        ->check(CLI::IsMember(curveweave::preset_names()))
        ->required();
    train->add_option("--ordering", tr.ordering_path, "curve ordering file");
    train->add_option("--ordering2", tr.ordering2_path, "second curve ordering file");
    train->add_option("--latent", tr.latent, "latent width")->required();
    train->add_option("--epochs", tr.epochs, "training epochs")->default_val(500);
    train->add_option("--batch", tr.batch, "batch size")->default_val(64);
    train->add_option("--lr", tr.lr, "learning rate")->default_val(1e-4);
    train->add_option("--seed", tr.seed, "random seed")->required();
    train->add_option("--grid", tr.grid, "grid dimensions NX NY (classical2d)")->expected(2);
    train->add_option("--out", tr.out_dir, "output directory")->required();
    train->callback([&] { run_train(tr); });

    // svd
    SvdOpts sv;
    auto* svd_cmd = app.add_subcommand("svd", "low-rank reconstruction baseline");
    svd_cmd->add_option("--data", sv.data_path, "snapshot file")->required();
    svd_cmd->add_option("--ranks", sv.ranks, "comma separated ranks")
        ->required()
        ->delimiter(',');
    svd_cmd->add_option("--out", sv.out, "output CSV")->required();
    svd_cmd->callback([&] { run_svd(sv); });

    // compare
    CompareOpts cp;
    auto* compare = app.add_subcommand("compare", "model metrics next to the baseline");
    compare->add_option("--model", cp.model_dir, "trained model directory")->required();
    compare->add_option("--data", cp.data_path, "snapshot file")->required();
    compare->add_option("--svd", cp.svd_csv, "baseline CSV from the svd command")->required();
    compare->add_option("--out", cp.out, "output CSV")->required();
    compare->callback([&] { run_compare(cp); });

    // field-error
    FieldErrorOpts fe;
    auto* field_error = app.add_subcommand("field-error", "per node reconstruction error");
    field_error->add_option("--model", fe.model_dir, "trained model directory")->required();
    field_error->add_option("--data", fe.data_path, "snapshot file")->required();
    field_error->add_option("--example", fe.example, "example index")->required();
    field_error->add_option("--out", fe.out, "output CSV")->required();
    field_error->callback([&] { run_field_error(fe); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
