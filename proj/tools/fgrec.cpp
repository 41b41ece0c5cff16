// Command-line surface for the fine-grained recognition lab: synthetic data
// generation, training, distillation, prediction with optional TTA, logit
// ensembling, evaluation, and the experiment report.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fgrec/checkpoint.hpp"
#include "fgrec/config.hpp"
#include "fgrec/dataset.hpp"
#include "fgrec/infer.hpp"
#include "fgrec/logits_io.hpp"
#include "fgrec/study.hpp"
#include "fgrec/train.hpp"

namespace {

std::vector<double> parse_weights(const std::string& text) {
    std::vector<double> weights;
    std::stringstream in(text);
    std::string field;
    while (std::getline(in, field, ',')) {
        try {
            weights.push_back(std::stod(field));
        } catch (const std::exception&) {
            throw fgrec::ConfigInvalid("bad weight '" + field + "'");
        }
    }
    return weights;
}

std::vector<std::string> parse_list(const std::string& text) {
    std::vector<std::string> items;
    std::stringstream in(text);
    std::string field;
    while (std::getline(in, field, ',')) items.push_back(field);
    return items;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw fgrec::Error("cannot open for writing: " + path);
    out << text;
}

struct TrainFlags {
    std::string data_dir;
    std::string config_id = "config-a";
    std::string out_path;
    std::string history_path;
    std::string loss_name;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    bool seed_set = false, epochs_set = false;
};

fgrec::ExperimentConfig resolve_train_config(const TrainFlags& flags) {
    fgrec::ExperimentConfig cfg = fgrec::resolve_config(flags.config_id);
    if (!flags.loss_name.empty()) cfg.loss = fgrec::loss_kind_from_name(flags.loss_name);
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.epochs_set) {
        cfg.epochs = flags.epochs;
        cfg.sched.t_max = std::max<std::size_t>(1, flags.epochs);
    }
    cfg.validate();
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"fgrec - desk-scale fine-grained recognition lab"};
    app.require_subcommand(1);

    // gen-data ------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    fgrec::SyntheticDatasetSpec spec;
    std::string gen_out;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--superclasses", spec.superclasses);
    gen->add_option("--fine", spec.fine_per_superclass, "fine classes per superclass");
    gen->add_option("--train-per-class", spec.train_per_class);
    gen->add_option("--val-per-class", spec.val_per_class);
    gen->add_option("--test-per-class", spec.test_per_class);
    gen->add_option("--size", spec.height, "image side in pixels");
    gen->add_option("--delta-fine", spec.delta_fine);
    gen->add_option("--sigma", spec.noise_sigma);
    gen->add_option("--seed", spec.seed);

    // train ---------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "train a model");
    TrainFlags tf;
    tr->add_option("--data", tf.data_dir, "dataset directory")->required();
    tr->add_option("--config", tf.config_id, "config-a | config-b | JSON path");
    tr->add_option("--loss", tf.loss_name, "ce | arcface | combined");
    tr->add_option("--out", tf.out_path, "checkpoint output path")->required();
    tr->add_option("--history", tf.history_path, "write history TSV here");
    tr->add_option("--seed", tf.seed)->each([&](const std::string&) { tf.seed_set = true; });
    tr->add_option("--epochs", tf.epochs)->each([&](const std::string&) {
        tf.epochs_set = true;
    });

    // distill ---------------------------------------------------------------
    auto* di = app.add_subcommand("distill", "distill a teacher into a student");
    TrainFlags df;
    std::string teacher_path;
    fgrec::KDConfig kd;
    di->add_option("--data", df.data_dir, "dataset directory")->required();
    di->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
    di->add_option("--config", df.config_id, "student config");
    di->add_option("--out", df.out_path, "student checkpoint output")->required();
    di->add_option("--history", df.history_path);
    di->add_option("--temperature", kd.temperature);
    di->add_option("--kd-weight", kd.kd_weight);
    di->add_option("--ce-weight", kd.ce_weight);
    di->add_option("--seed", df.seed)->each([&](const std::string&) { df.seed_set = true; });
    di->add_option("--epochs", df.epochs)->each([&](const std::string&) {
        df.epochs_set = true;
    });

    // predict ---------------------------------------------------------------
    auto* pr = app.add_subcommand("predict", "write a logit matrix for a split");
    std::string pr_ckpt, pr_data, pr_split = "test", pr_out, pr_tag;
    bool pr_tta = false;
    pr->add_option("--ckpt", pr_ckpt)->required();
    pr->add_option("--data", pr_data)->required();
    pr->add_option("--split", pr_split, "train | val | test");
    pr->add_option("--out", pr_out)->required();
    pr->add_option("--tag", pr_tag, "model tag stored in the file");
    pr->add_flag("--tta", pr_tta, "test-time augmentation");

    // ensemble ---------------------------------------------------------------
    auto* en = app.add_subcommand("ensemble", "combine logit matrices");
    std::string en_method = "logit_sum", en_weights, en_out, en_stack_val, en_data;
    std::vector<std::string> en_members;
    en->add_option("--method", en_method, "logit_sum | vote | stacking");
    en->add_option("--weights", en_weights, "comma-separated member weights");
    en->add_option("--out", en_out, "predictions CSV output")->required();
    en->add_option("--stack-val", en_stack_val,
                   "comma-separated member logit files on the val split (stacking)");
    en->add_option("--data", en_data, "dataset dir for stacking labels");
    en->add_option("members", en_members, "member logit files")->required();

    // eval ---------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "top-1 accuracy of a predictions file");
    std::string ev_preds, ev_data, ev_split = "test";
    ev->add_option("--preds", ev_preds)->required();
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--split", ev_split);

    // report ---------------------------------------------------------------
    auto* re = app.add_subcommand("report", "run the directional study and print tables");
    fgrec::StudyOptions study = fgrec::StudyOptions::defaults();
    std::string re_seeds, re_out;
    re->add_option("--train-per-class", study.data_spec.train_per_class);
    re->add_option("--epochs", study.base.epochs);
    re->add_option("--seeds", re_seeds, "comma-separated training seeds");
    re->add_option("--data-seed", study.data_spec.seed);
    re->add_option("--out", re_out, "also write the report here");
    re->add_flag("--verbose", study.verbose, "progress lines on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage problems exit 1; --help exits 0.
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            spec.width = spec.height;
            const fgrec::SyntheticDataset data = fgrec::generate_dataset(spec);
            fgrec::save_dataset_dir(data, gen_out);
            std::printf("wrote %zu train / %zu val / %zu test images, %zu classes -> %s\n",
                        data.train.size(), data.val.size(), data.test.size(),
                        data.train.class_count, gen_out.c_str());
        } else if (tr->parsed()) {
            const fgrec::ExperimentConfig cfg = resolve_train_config(tf);
            const fgrec::Dataset train_set = fgrec::load_split(tf.data_dir, "train");
            const fgrec::Dataset val_set = fgrec::load_split(tf.data_dir, "val");
            const fgrec::TrainResult result = fgrec::train(cfg, train_set, val_set);
            fgrec::save_checkpoint(result.checkpoint, tf.out_path);
            if (!tf.history_path.empty())
                write_text(tf.history_path, fgrec::history_to_tsv(result.history));
            if (!result.history.empty()) {
                const fgrec::EpochRecord& last = result.history.back();
                std::printf("trained %zu epochs, final train top-1 %.4f, val top-1 %.4f\n",
                            last.epoch, last.train_top1, last.val_top1);
            }
        } else if (di->parsed()) {
            const fgrec::ExperimentConfig cfg = resolve_train_config(df);
            const fgrec::Checkpoint teacher = fgrec::load_checkpoint(teacher_path);
            const fgrec::Dataset train_set = fgrec::load_split(df.data_dir, "train");
            const fgrec::Dataset val_set = fgrec::load_split(df.data_dir, "val");
            const fgrec::TrainResult result =
                fgrec::distill(teacher, cfg, kd, train_set, val_set);
            fgrec::save_checkpoint(result.checkpoint, df.out_path);
            if (!df.history_path.empty())
                write_text(df.history_path, fgrec::history_to_tsv(result.history));
        } else if (pr->parsed()) {
            const fgrec::Checkpoint ckpt = fgrec::load_checkpoint(pr_ckpt);
            const fgrec::Dataset split = fgrec::load_split(pr_data, pr_split);
            fgrec::TTAConfig tta;
            tta.test_size = ckpt.config.test_size;
            const std::string tag = pr_tag.empty() ? pr_split : pr_tag;
            const fgrec::LogitMatrix matrix =
                fgrec::predict_dataset(ckpt, split, pr_tta ? &tta : nullptr, tag);
            fgrec::save_logits(matrix, pr_out);
            std::printf("wrote %zu rows x %zu classes -> %s\n", matrix.size(),
                        matrix.class_count, pr_out.c_str());
        } else if (en->parsed()) {
            fgrec::EnsembleSpec ens;
            ens.method = fgrec::ensemble_method_from_name(en_method);
            std::vector<double> weights(en_members.size(), 1.0);
            if (!en_weights.empty()) {
                weights = parse_weights(en_weights);
                if (weights.size() != en_members.size())
                    throw fgrec::ConfigInvalid("weight count differs from member count");
            }
            for (std::size_t m = 0; m < en_members.size(); ++m)
                ens.members.push_back({fgrec::load_logits(en_members[m]), weights[m]});

            std::vector<std::size_t> predictions;
            if (ens.method == fgrec::EnsembleMethod::logit_sum)
                predictions = fgrec::ensemble_logit_sum(ens);
            else if (ens.method == fgrec::EnsembleMethod::vote)
                predictions = fgrec::ensemble_vote(ens);
            else {
                if (en_stack_val.empty() || en_data.empty())
                    throw fgrec::ConfigInvalid(
                        "stacking needs --stack-val files and --data for val labels");
                std::vector<fgrec::LogitMatrix> val_matrices;
                for (const std::string& path : parse_list(en_stack_val))
                    val_matrices.push_back(fgrec::load_logits(path));
                if (val_matrices.size() != ens.members.size())
                    throw fgrec::ConfigInvalid(
                        "--stack-val count differs from member count");
                const fgrec::Dataset val = fgrec::load_split(en_data, "val");
                const fgrec::StackingModel meta =
                    fgrec::fit_stacking(val_matrices, fgrec::labels_of(val));
                predictions = fgrec::ensemble_stacking(meta, ens);
            }
            fgrec::save_predictions(ens.members.front().matrix.image_ids, predictions,
                                    en_out);
            std::printf("wrote %zu predictions -> %s\n", predictions.size(),
                        en_out.c_str());
        } else if (ev->parsed()) {
            const auto [ids, predictions] = fgrec::load_predictions(ev_preds);
            const fgrec::Dataset split = fgrec::load_split(ev_data, ev_split);
            std::vector<std::size_t> labels;
            for (const std::uint64_t id : ids) {
                if (id >= split.size())
                    throw fgrec::LengthMismatch("prediction id beyond split size");
                labels.push_back(split.labels[id]);
            }
            std::printf("%.4f\n", fgrec::top1_accuracy(predictions, labels));
        } else if (re->parsed()) {
            study.base.sched.t_max = std::max<std::size_t>(1, study.base.epochs);
            study.config_a.epochs = study.base.epochs;
            study.config_a.sched.t_max = study.base.sched.t_max;
            if (!re_seeds.empty()) {
                study.seeds.clear();
                for (const std::string& s : parse_list(re_seeds))
                    study.seeds.push_back(std::stoull(s));
            }
            const fgrec::StudyResult result = fgrec::run_study(study);
            const std::string text = fgrec::render_report(result);
            std::fputs(text.c_str(), stdout);
            if (!re_out.empty()) write_text(re_out, text);
        }
    } catch (const fgrec::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
