#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgrec/config.hpp"
#include "fgrec/dataset.hpp"
#include "fgrec/infer.hpp"
#include "fgrec/train.hpp"

namespace fgrec {

// Recipe for the directional study behind the report tables. Per seed:
//   - the three losses head-to-head on the base (config-b) recipe,
//   - TTA on the combined model,
//   - a two-member ensemble pairing the config-a model with the combined
//     config-b model under all three combiners (weights follow the
//     performance rule), and
//   - a student distilled from a converged combined teacher against a
//     CE-only student at the identical budget.
// Leave-one-seed-out four-member logit-sum ensembles come on top.
struct StudyOptions {
    SyntheticDatasetSpec data_spec;
    ExperimentConfig base;     // config-b analog; loss switched per variant
    ExperimentConfig config_a; // the second configuration for the ensembles
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::size_t teacher_epochs = 20;
    std::size_t student_epochs = 10;
    // Distillation softens both heads at this scale; tempering s = 32 cosine
    // logits by T = 3 would leave the teacher distribution one-hot.
    double student_scale = 8.0;
    bool verbose = false;

    static StudyOptions defaults();
};

struct SeedResult {
    std::uint64_t seed = 0;
    double ce_top1 = 0.0;
    double arcface_top1 = 0.0;
    double combined_top1 = 0.0;
    double config_a_top1 = 0.0;
    double combined_val = 0.0;
    double config_a_val = 0.0;
    double combined_tta_top1 = 0.0;
    double teacher_top1 = 0.0;
    double student_ce_top1 = 0.0;
    double student_kd_top1 = 0.0;
    double ens2_logit_sum = 0.0;
    double ens2_vote = 0.0;
    double ens2_stacking = 0.0;
};

struct TrialResult {
    std::uint64_t held_out_seed = 0;
    double ensemble4_top1 = 0.0;
    double best_member_top1 = 0.0;
};

struct StudyResult {
    std::vector<SeedResult> per_seed;
    std::vector<TrialResult> trials;
};

StudyResult run_study(const StudyOptions& options);

// Text tables in the shape of the published experiment summaries.
std::string render_report(const StudyResult& result);

double median(std::vector<double> values);

std::vector<std::size_t> labels_of(const Dataset& dataset);

// Accuracy of per-row argmax over a logit matrix.
double matrix_top1(const LogitMatrix& matrix, const std::vector<std::size_t>& labels);

} // namespace fgrec
