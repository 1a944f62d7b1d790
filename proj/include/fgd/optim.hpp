#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgd/linmodel.hpp"
#include "fgd/random.hpp"

namespace fgd {

enum class Method { Sgd, Fgd, Afgd };

/// Optimizer variant. `ell` is the number of updates per training sample
/// (always 1 for SGD).
struct OptimizerKind
{
    Method method = Method::Sgd;
    int ell = 1;

    static OptimizerKind sgd() { return {Method::Sgd, 1}; }
    static OptimizerKind fgd(int ell);
    static OptimizerKind afgd(int ell);

    int inner_updates() const noexcept { return method == Method::Sgd ? 1 : ell; }
    /// "SGD", "FGD(3)", "aFGD(10)".
    std::string label() const;

    friend bool operator==(const OptimizerKind&, const OptimizerKind&) = default;
};

enum class ScheduleMode { TheoremForm, Constant };

/*!
 * Learning-rate rule.
 *
 * TheoremForm: alpha_i = c1 / (ell * (c1 * c2 + i)), i >= 1.
 * Constant:    alpha_i = alpha.
 */
struct Schedule
{
    ScheduleMode mode = ScheduleMode::TheoremForm;
    double c1 = 1.0;
    double c2 = 1.0;
    int ell = 1;
    double alpha = 0.0;

    static Schedule theorem_form(double c1, double c2, int ell);
    static Schedule constant(double alpha, int ell = 1);

    /// Same rule with every rate multiplied by `factor`. For TheoremForm this is
    /// again a TheoremForm rule with (c1 * factor, c2 / factor).
    Schedule scaled(double factor) const;
};

double learning_rate(const Schedule& schedule, long i);

struct ScheduleConstants
{
    double c1 = 0.0;
    double c2 = 0.0;
};

/// Equality constants for the FGD(ell) MSPE bound:
/// c1 = 2 / lmin!=0, c2 = (4 b / lmin!=0) (2 lmax + tr / ell).
ScheduleConstants theorem2_constants(const SecondMomentSummary& sigma, double b, int ell);

/// Equality constants for the aFGD(ell) MSE bound:
/// c1 = sqrt(32 pi) / lmin, c2 = sqrt(pi / 2) b max(1, 4 d kappa / ell).
/// Requires full-rank Sigma.
ScheduleConstants theorem4_constants(const SecondMomentSummary& sigma, double b, int ell);

/// Throws InadmissibleError naming the violated condition unless `schedule` is a
/// TheoremForm rule with c1 >= 2 / lmin!=0 and c2 >= (3b / lmin!=0)(2 lmax + tr / ell).
void check_theorem2_admissible(const Schedule& schedule, const SecondMomentSummary& sigma, double b);

/// As above for the aFGD bound. The c2 condition involves b and is checked only
/// when `b` is given.
void check_theorem4_admissible(const Schedule& schedule, const SecondMomentSummary& sigma,
                               std::optional<double> b);

/// TheoremForm schedule with the theorem2_constants. Also verifies the step-size
/// precondition alpha_1 * ell * b <= 1/4 used by the recursion.
Schedule theorem2_schedule(const SecondMomentSummary& sigma, double b, int ell);

/// TheoremForm schedule with the theorem4_constants.
Schedule theorem4_schedule(const SecondMomentSummary& sigma, double b, int ell);

struct TrajectoryState
{
    Vector theta;
    long outer_step = 0;
    int inner_step = 0;
};

/// theta + alpha (y - x^T theta) x; increments the outer step.
TrajectoryState sgd_step(const TrajectoryState& state, const Vector& x, double y, double alpha);

/// theta + alpha (y - x^T theta) (x^T xi) xi; increments the inner step.
TrajectoryState fgd_step(const TrajectoryState& state, const Vector& x, double y, double alpha,
                         const Vector& xi);

/// theta + beta (y - x^T theta) ||x|| sign(x^T xi) xi with sign(0) = 0;
/// increments the inner step.
TrajectoryState afgd_step(const TrajectoryState& state, const Vector& x, double y, double beta,
                          const Vector& xi);

/// One training sample: `inner_updates()` updates with a fresh xi each, all with
/// the rate alpha_k, k = outer_step + 1. Returns k + 1 with inner_step reset.
TrajectoryState run_outer_step(const TrajectoryState& state, const OptimizerKind& optimizer,
                               const Schedule& schedule, const Vector& x, double y, Rng& xi_rng);

/*!
 * In-place kernel shared by the pure step functions and the runners, so both
 * paths perform bitwise-identical arithmetic. `xi` is scratch of length d.
 * `rate_index` is the learning-rate index i of the sample.
 */
void apply_outer_update(Eigen::Ref<Vector> theta, const OptimizerKind& optimizer,
                        const Schedule& schedule, long rate_index,
                        const Eigen::Ref<const Vector>& x, double y, Rng& xi_rng,
                        Eigen::Ref<Vector> xi);

struct Checkpoint
{
    long step = 0;
    Vector theta;
};

/*!
 * Streaming run: one fresh pair from `data_rng` per outer step, perturbation
 * directions from `xi_rng`. Records theta after k outer steps for every k in
 * `checkpoints` (sorted, unique, within [0, n_steps]).
 */
std::vector<Checkpoint> run_trajectory(const ModelSpec& model, const OptimizerKind& optimizer,
                                       const Schedule& schedule, long n_steps,
                                       std::span<const long> checkpoints, const Vector& theta0,
                                       Rng& data_rng, Rng& xi_rng);

/// Single-stream convenience: splits `rng` into a data stream then a xi stream.
std::vector<Checkpoint> run_trajectory(const ModelSpec& model, const OptimizerKind& optimizer,
                                       const Schedule& schedule, long n_steps,
                                       std::span<const long> checkpoints, const Vector& theta0,
                                       Rng& rng);

struct EpochCheckpoint
{
    int epoch = 0;
    Vector theta;
};

/*!
 * Cycles `n_epochs` times through `data` in order. The learning-rate index keeps
 * counting across epochs: i = (e - 1) n + k. Returns theta0 as epoch 0 followed
 * by the iterate after each epoch.
 */
std::vector<EpochCheckpoint> run_epochs(const Dataset& data, const OptimizerKind& optimizer,
                                        const Schedule& schedule, int n_epochs,
                                        const Vector& theta0, Rng& xi_rng);

/// Draws a dataset of size n from `data_rng`, then calls run_epochs.
std::vector<EpochCheckpoint> run_trajectory_epochs(const ModelSpec& model,
                                                   const OptimizerKind& optimizer,
                                                   const Schedule& schedule, long n, int n_epochs,
                                                   const Vector& theta0, Rng& data_rng,
                                                   Rng& xi_rng);

}  // namespace fgd
