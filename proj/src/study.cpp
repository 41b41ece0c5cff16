#include "fgrec/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace fgrec {
namespace {

std::vector<std::size_t> matrix_argmax(const LogitMatrix& matrix) {
    std::vector<std::size_t> out(matrix.size());
    for (std::size_t i = 0; i < matrix.size(); ++i)
        out[i] = argmax_lowest(&matrix.logits.data[i * matrix.class_count],
                               matrix.class_count);
    return out;
}

void note(const StudyOptions& options, const std::string& line) {
    if (options.verbose) std::fprintf(stderr, "[study] %s\n", line.c_str());
}

} // namespace

double median(std::vector<double> values) {
    if (values.empty()) throw LengthMismatch("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<std::size_t> labels_of(const Dataset& dataset) {
    std::vector<std::size_t> out(dataset.labels.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = dataset.labels[i];
    return out;
}

double matrix_top1(const LogitMatrix& matrix, const std::vector<std::size_t>& labels) {
    return top1_accuracy(matrix_argmax(matrix), labels);
}

StudyOptions StudyOptions::defaults() {
    StudyOptions options;
    options.data_spec.train_per_class = 50;
    options.data_spec.val_per_class = 30;
    options.data_spec.test_per_class = 50;
    options.base = preset_config_b();
    options.base.epochs = 12;
    options.base.sched.t_max = 12;
    options.config_a = preset_config_a();
    options.config_a.epochs = 12;
    options.config_a.sched.t_max = 12;
    return options;
}

StudyResult run_study(const StudyOptions& options) {
    const SyntheticDataset data = generate_dataset(options.data_spec);
    const std::vector<std::size_t> val_labels = labels_of(data.val);
    const std::vector<std::size_t> test_labels = labels_of(data.test);

    StudyResult result;
    std::vector<LogitMatrix> combined_test_matrices;
    std::vector<double> combined_val_scores;

    for (const std::uint64_t seed : options.seeds) {
        SeedResult row;
        row.seed = seed;

        ExperimentConfig cfg = options.base;
        cfg.seed = seed;

        cfg.loss = LossKind::cross_entropy;
        const TrainResult ce_run = train(cfg, data.train, data.val);
        row.ce_top1 = evaluate_top1(ce_run.checkpoint, data.test);
        note(options,
             "seed " + std::to_string(seed) + " ce=" + std::to_string(row.ce_top1));

        cfg.loss = LossKind::arcface;
        const TrainResult arc_run = train(cfg, data.train, data.val);
        row.arcface_top1 = evaluate_top1(arc_run.checkpoint, data.test);
        note(options,
             "seed " + std::to_string(seed) + " arcface=" + std::to_string(row.arcface_top1));

        cfg.loss = LossKind::combined;
        const TrainResult comb_run = train(cfg, data.train, data.val);
        row.combined_top1 = evaluate_top1(comb_run.checkpoint, data.test);
        row.combined_val = evaluate_top1(comb_run.checkpoint, data.val);
        note(options,
             "seed " + std::to_string(seed) + " combined=" + std::to_string(row.combined_top1));

        TTAConfig tta;
        tta.test_size = cfg.test_size;
        const LogitMatrix comb_tta =
            predict_dataset(comb_run.checkpoint, data.test, &tta, "combined-tta");
        row.combined_tta_top1 = matrix_top1(comb_tta, test_labels);

        // Second configuration for the heterogeneous two-member ensemble.
        ExperimentConfig cfg_a = options.config_a;
        cfg_a.seed = seed;
        const TrainResult cfga_run = train(cfg_a, data.train, data.val);
        row.config_a_top1 = evaluate_top1(cfga_run.checkpoint, data.test);
        row.config_a_val = evaluate_top1(cfga_run.checkpoint, data.val);
        note(options,
             "seed " + std::to_string(seed) + " config-a=" + std::to_string(row.config_a_top1));

        const LogitMatrix cfga_test =
            predict_dataset(cfga_run.checkpoint, data.test, nullptr, "config-a");
        const LogitMatrix comb_test =
            predict_dataset(comb_run.checkpoint, data.test, nullptr, "combined");
        const LogitMatrix cfga_val =
            predict_dataset(cfga_run.checkpoint, data.val, nullptr, "config-a");
        const LogitMatrix comb_val =
            predict_dataset(comb_run.checkpoint, data.val, nullptr, "combined");

        EnsembleSpec pair;
        pair.members.push_back({cfga_test, score_based_weight(row.config_a_val)});
        pair.members.push_back({comb_test, score_based_weight(row.combined_val)});
        row.ens2_logit_sum = top1_accuracy(ensemble_logit_sum(pair), test_labels);
        row.ens2_vote = top1_accuracy(ensemble_vote(pair), test_labels);
        const StackingModel meta = fit_stacking({cfga_val, comb_val}, val_labels);
        row.ens2_stacking = top1_accuracy(ensemble_stacking(meta, pair), test_labels);

        // Distillation: a converged combined teacher teaches a fresh student
        // of the same architecture; the baseline student is CE-only at the
        // identical budget. Both students run their heads at student_scale.
        ExperimentConfig teacher_cfg = options.base;
        teacher_cfg.loss = LossKind::combined;
        teacher_cfg.epochs = options.teacher_epochs;
        teacher_cfg.sched.t_max = options.teacher_epochs;
        teacher_cfg.seed = seed;
        const TrainResult teacher = train(teacher_cfg, data.train, data.val);
        row.teacher_top1 = evaluate_top1(teacher.checkpoint, data.test);

        ExperimentConfig student = options.base;
        student.loss = LossKind::cross_entropy;
        student.epochs = options.student_epochs;
        student.sched.t_max = options.student_epochs;
        student.arc.scale = options.student_scale;
        student.seed = seed + 100; // fresh init, shared by both students
        const TrainResult student_ce = train(student, data.train, data.val);
        row.student_ce_top1 = evaluate_top1(student_ce.checkpoint, data.test);
        KDConfig kd; // T = 3, weights 1:1
        const TrainResult student_kd =
            distill(teacher.checkpoint, student, kd, data.train, data.val);
        row.student_kd_top1 = evaluate_top1(student_kd.checkpoint, data.test);
        note(options, "seed " + std::to_string(seed) +
                          " student ce=" + std::to_string(row.student_ce_top1) +
                          " kd=" + std::to_string(row.student_kd_top1));

        combined_test_matrices.push_back(comb_test);
        combined_val_scores.push_back(row.combined_val);
        result.per_seed.push_back(row);
    }

    // Leave-one-seed-out four-member logit-sum ensembles.
    for (std::size_t t = 0; t < options.seeds.size(); ++t) {
        TrialResult trial;
        trial.held_out_seed = options.seeds[t];
        EnsembleSpec spec;
        double best = 0.0;
        for (std::size_t m = 0; m < options.seeds.size(); ++m) {
            if (m == t) continue;
            spec.members.push_back(
                {combined_test_matrices[m], score_based_weight(combined_val_scores[m])});
            best = std::max(best, result.per_seed[m].combined_top1);
        }
        trial.ensemble4_top1 = top1_accuracy(ensemble_logit_sum(spec), test_labels);
        trial.best_member_top1 = best;
        result.trials.push_back(trial);
    }
    return result;
}

std::string render_report(const StudyResult& result) {
    std::ostringstream out;
    char buf[256];

    const auto collect = [&](auto field) {
        std::vector<double> values;
        for (const SeedResult& row : result.per_seed) values.push_back(field(row));
        return values;
    };
    const auto ce = collect([](const SeedResult& r) { return r.ce_top1; });
    const auto arc = collect([](const SeedResult& r) { return r.arcface_top1; });
    const auto comb = collect([](const SeedResult& r) { return r.combined_top1; });
    const auto cfga = collect([](const SeedResult& r) { return r.config_a_top1; });
    const auto tta = collect([](const SeedResult& r) { return r.combined_tta_top1; });
    const auto s_ce = collect([](const SeedResult& r) { return r.student_ce_top1; });
    const auto s_kd = collect([](const SeedResult& r) { return r.student_kd_top1; });
    const auto e_sum = collect([](const SeedResult& r) { return r.ens2_logit_sum; });
    const auto e_vote = collect([](const SeedResult& r) { return r.ens2_vote; });
    const auto e_stack = collect([](const SeedResult& r) { return r.ens2_stacking; });

    out << "== Loss and configuration comparison (test top-1, median over seeds) ==\n";
    std::snprintf(buf, sizeof(buf),
                  "  %-28s %.4f\n  %-28s %.4f\n  %-28s %.4f\n  %-28s %.4f\n",
                  "Cross Entropy (config-b)", median(ce), "Arcface loss (config-a)",
                  median(cfga), "Arcface loss (config-b)", median(arc),
                  "Arcface + Circle (config-b)", median(comb));
    out << buf;

    out << "\n== Pipeline (median over seeds/trials) ==\n";
    std::vector<double> ens4;
    for (const TrialResult& t : result.trials) ens4.push_back(t.ensemble4_top1);
    std::snprintf(buf, sizeof(buf),
                  "  %-28s %.4f\n  %-28s %.4f\n  %-28s %.4f\n",
                  "Single model", median(comb), "+ Test-time augmentation", median(tta),
                  "+ Ensemble models", median(ens4));
    out << buf;

    out << "\n== Two-member ensemble methods (median over seeds) ==\n";
    std::snprintf(buf, sizeof(buf),
                  "  %-28s %.4f\n  %-28s %.4f\n  %-28s %.4f\n",
                  "Vote", median(e_vote), "Stacking", median(e_stack), "Logits sum",
                  median(e_sum));
    out << buf;

    out << "\n== Distillation (student test top-1, median over seeds) ==\n";
    std::snprintf(buf, sizeof(buf), "  %-28s %.4f\n  %-28s %.4f\n",
                  "CE-only student", median(s_ce), "Distilled student (T=3, 1:1)",
                  median(s_kd));
    out << buf;

    out << "\n== Per seed ==\n";
    out << "  seed   ce     arc-a  arc-b  comb   tta    e2sum  e2vote e2stk  stu-ce "
           "stu-kd\n";
    for (const SeedResult& r : result.per_seed) {
        std::snprintf(buf, sizeof(buf),
                      "  %-5llu %.4f %.4f %.4f %.4f %.4f %.4f %.4f %.4f %.4f %.4f\n",
                      static_cast<unsigned long long>(r.seed), r.ce_top1, r.config_a_top1,
                      r.arcface_top1, r.combined_top1, r.combined_tta_top1,
                      r.ens2_logit_sum, r.ens2_vote, r.ens2_stacking, r.student_ce_top1,
                      r.student_kd_top1);
        out << buf;
    }
    out << "\n== Four-member leave-one-seed-out ensembles ==\n";
    for (const TrialResult& t : result.trials) {
        std::snprintf(buf, sizeof(buf),
                      "  without seed %-4llu ensemble %.4f  best member %.4f\n",
                      static_cast<unsigned long long>(t.held_out_seed), t.ensemble4_top1,
                      t.best_member_top1);
        out << buf;
    }
    return out.str();
}

} // namespace fgrec
