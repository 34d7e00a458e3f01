#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sga/ablation.hpp"
#include "sga/datasets.hpp"
#include "sga/errors.hpp"
#include "sga/evaluation.hpp"
#include "sga/heatmap.hpp"
#include "sga/network.hpp"
#include "sga/run_config.hpp"
#include "sga/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

const char* const kSplitNames[] = {"train", "val", "test_iid", "test_ood"};

fs::path split_path(const fs::path& dir, const std::string& name) { return dir / (name + ".sgad"); }

struct Common {
    std::string config_path;
    std::optional<std::string> data_dir;
    std::optional<std::string> model_path;
    std::optional<std::string> out_dir;

    sga::RunConfig load() const {
        sga::RunConfig c = config_path.empty() ? sga::RunConfig{} : sga::load_run_config(config_path);
        if (data_dir) c.data_dir = *data_dir;
        if (model_path) c.model_path = *model_path;
        if (out_dir) c.out_dir = *out_dir;
        c.validate();
        return c;
    }
};

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw sga::FormatError(sga::FormatError::Kind::io, "cannot create directory '" + dir.string() + "'");
}

sga::LabeledDataset load_split(const fs::path& dir, const std::string& name) {
    return sga::load(split_path(dir, name));
}

int cmd_generate(const Common& common) {
    const sga::RunConfig c = common.load();
    const sga::DatasetSplits splits = sga::generate(c.data);
    make_dir(c.data_dir);
    const sga::LabeledDataset* parts[] = {&splits.train, &splits.val, &splits.test_iid, &splits.test_ood};
    for (std::size_t i = 0; i < 4; ++i) {
        sga::save(*parts[i], split_path(c.data_dir, kSplitNames[i]));
        std::cout << kSplitNames[i] << " " << parts[i]->size() << "\n";
    }
    return 0;
}

int cmd_train(const Common& common, const std::string& log_path) {
    const sga::RunConfig c = common.load();
    const sga::LabeledDataset train_set = load_split(c.data_dir, "train");
    const sga::LabeledDataset val_set = load_split(c.data_dir, "val");
    sga::TrainConfig config = c.train;
    config.network.input_dim = train_set.dim();
    const sga::TrainResult result = sga::train(config, train_set, val_set);

    const fs::path log = log_path.empty() ? c.out_dir / "train_log.csv" : fs::path(log_path);
    if (c.model_path.has_parent_path()) make_dir(c.model_path.parent_path());
    if (log.has_parent_path()) make_dir(log.parent_path());
    sga::save_model(result.params, c.model_path);
    result.log.write_csv(log);
    std::cout << "selected_epoch " << result.log.selected_epoch << "\n";
    return 0;
}

int cmd_eval(const Common& common, const std::string& iid_path, const std::string& ood_path) {
    const sga::RunConfig c = common.load();
    const sga::NetworkParams params = sga::load_model(c.model_path);
    const sga::LabeledDataset iid = iid_path.empty() ? load_split(c.data_dir, "test_iid") : sga::load(iid_path);
    const sga::LabeledDataset ood = ood_path.empty() ? load_split(c.data_dir, "test_ood") : sga::load(ood_path);
    const sga::EvalReport report = sga::evaluate(params, iid, ood);
    make_dir(c.out_dir);
    sga::write_eval_csv(report, c.out_dir / "eval.csv");
    sga::write_roc_csv(sga::roc_points(sga::positive_scores(params, iid), iid.labels), c.out_dir / "roc_iid.csv");
    sga::write_roc_csv(sga::roc_points(sga::positive_scores(params, ood), ood.labels), c.out_dir / "roc_ood.csv");
    return 0;
}

int cmd_saliency(const Common& common, const std::string& dataset_path, const std::vector<std::size_t>& indices,
                 double q) {
    const sga::RunConfig c = common.load();
    const sga::NetworkParams params = sga::load_model(c.model_path);
    const sga::LabeledDataset ds = dataset_path.empty() ? load_split(c.data_dir, "test_ood") : sga::load(dataset_path);
    if (ds.dim() != params.spec.input_dim) throw sga::ShapeError("model and dataset feature counts differ");
    std::size_t side = 0;
    while (side * side < ds.dim()) ++side;
    if (side * side != ds.dim()) throw sga::ShapeError("dataset feature count is not a square image");
    for (std::size_t i : indices) {
        if (i >= ds.size()) {
            throw sga::ValidationError("sample index " + std::to_string(i) + " out of range (dataset has " +
                                       std::to_string(ds.size()) + " rows)");
        }
    }

    make_dir(c.out_dir);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i : indices) {
        const sga::Tensor x = sga::Tensor::row_vector({ds.features.row(i).begin(), ds.features.row(i).end()});
        const sga::SaliencyMap s = sga::compute_saliency(params, x, ds.labels[i]);
        sga::save_pgm(sga::heatmap(s.values.data(), side), c.out_dir / ("saliency_" + std::to_string(i) + ".pgm"));
        rows.push_back({std::to_string(i), std::to_string(ds.labels[i]),
                        sga::csv::number(sga::saliency_overlap(s, ds.relevant_mask, q))});
    }
    sga::csv::write(c.out_dir / "overlap.csv", {"index", "label", "overlap"}, rows);
    return 0;
}

int cmd_ablate(const Common& common, const std::string& parameter, std::vector<double> values,
               std::vector<std::uint64_t> seeds) {
    const sga::RunConfig c = common.load();
    const sga::AblationParameter p = sga::parse_ablation_parameter(parameter);
    if (values.empty()) values = sga::default_grid(p);
    if (seeds.empty()) seeds = sga::default_seeds();
    const sga::LabeledDataset train_set = load_split(c.data_dir, "train");
    const sga::LabeledDataset val_set = load_split(c.data_dir, "val");
    const sga::LabeledDataset iid = load_split(c.data_dir, "test_iid");
    const sga::LabeledDataset ood = load_split(c.data_dir, "test_ood");
    sga::TrainConfig base = c.train;
    base.network.input_dim = train_set.dim();

    const sga::AblationReport report = sga::ablate(base, p, values, seeds, {train_set, val_set, iid, ood});
    make_dir(c.out_dir);
    const std::string stem = "ablation_" + std::string(sga::to_string(p));
    report.write_cells_csv(c.out_dir / (stem + "_cells.csv"));
    report.write_table_csv(c.out_dir / (stem + "_table.csv"));
    if (!report.at_reference.empty()) report.write_reference_csv(c.out_dir / (stem + "_at_reference.csv"));
    std::cout << "best_value " << sga::csv::number(report.best_value) << "\n";
    return 0;
}

int cmd_config(const Common& common) {
    std::cout << sga::emit_run_config(common.load());
    return 0;
}

void add_common(CLI::App* sub, Common& common, bool data, bool model, bool out) {
    sub->add_option("-c,--config", common.config_path, "key = value run configuration")->check(CLI::ExistingFile);
    if (data) sub->add_option("-d,--data-dir", common.data_dir, "dataset directory (overrides data_dir)");
    if (model) sub->add_option("-m,--model", common.model_path, "model file (overrides model_path)");
    if (out) sub->add_option("-o,--out-dir", common.out_dir, "output directory (overrides out_dir)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Saliency-guided adversarial training on a planted-shortcut benchmark"};
    app.require_subcommand(1);

    Common common;
    std::string log_path, iid_path, ood_path, dataset_path, parameter = "k";
    std::vector<std::size_t> indices;
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
    double q = 0.1;

    auto* gen = app.add_subcommand("generate", "write train/val/test_iid/test_ood datasets");
    add_common(gen, common, true, false, false);

    auto* tr = app.add_subcommand("train", "train a model and write its best-validation checkpoint");
    add_common(tr, common, true, true, true);
    tr->add_option("--log", log_path, "training log CSV (default <out_dir>/train_log.csv)");

    auto* ev = app.add_subcommand("eval", "IID/OOD AUROC report and ROC curves");
    add_common(ev, common, true, true, true);
    ev->add_option("--iid", iid_path, "IID test set (default <data_dir>/test_iid.sgad)");
    ev->add_option("--ood", ood_path, "OOD test set (default <data_dir>/test_ood.sgad)");

    auto* sal = app.add_subcommand("saliency", "PGM saliency heatmaps and overlap with the relevant region");
    add_common(sal, common, true, true, true);
    sal->add_option("--dataset", dataset_path, "dataset file (default <data_dir>/test_ood.sgad)");
    sal->add_option("-i,--indices", indices, "sample indices")->required()->delimiter(',');
    sal->add_option("-q", q, "top fraction of features for the overlap")->check(CLI::Range(0.0, 1.0));

    auto* abl = app.add_subcommand("ablate", "sweep k or lambda over several seeds");
    add_common(abl, common, true, false, true);
    abl->add_option("-p,--parameter", parameter, "k or lambda");
    abl->add_option("--values", values, "values to sweep (default: 0..0.2 step 0.05 for k, 0..2 step 0.5 for lambda)")
        ->delimiter(',');
    abl->add_option("--seeds", seeds, "training seeds (default 0,1,2,3,4)")->delimiter(',');

    auto* cfg = app.add_subcommand("config", "print the resolved configuration");
    add_common(cfg, common, true, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*gen) return cmd_generate(common);
        if (*tr) return cmd_train(common, log_path);
        if (*ev) return cmd_eval(common, iid_path, ood_path);
        if (*sal) return cmd_saliency(common, dataset_path, indices, q);
        if (*abl) return cmd_ablate(common, parameter, values, seeds);
        if (*cfg) return cmd_config(common);
    } catch (const sga::NumericError& e) {
        std::cerr << "error: " << e.what() << " (epoch " << e.epoch() << ")\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
