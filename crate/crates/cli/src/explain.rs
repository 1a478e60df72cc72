//! Plain-text descriptions for `gibbs-forge explain`.

use crate::config::Experiment;

pub fn describe(e: Experiment) -> &'static str {
    match e {
        Experiment::Sample => "\
sample: exact draws of the Gibbs process on the window with the configured
boundary, using params.sampler (rejection, kernel_thin or embed).

Columns of sample.csv:
  replicate         replicate index
  count             number of points in the draw
  mean_nn_distance  mean nearest-neighbour distance (NaN below two points)
",
        Experiment::Couple => "\
couple: runs the disagreement coupling of the processes with boundaries
`boundary` and `boundary_prime` from one dominating Poisson process. Each
disagreement point is checked to be connected, through the relation graph of
both outputs and both boundaries, to a boundary point.

Columns of couple.csv:
  xi, xi_prime    sizes of the two coupled configurations
  disagreement    size of their symmetric difference
  stages          number of layers processed
  terminated_at   first layer that stayed empty in both chains
  certified       every disagreement point reaches a boundary point
  dominated       both outputs lie inside the driving process
  capped          retention estimates that hit their sample cap
",
        Experiment::Gnz => "\
gnz: checks the GNZ equation E sum_x f(x, X - x) = E int f(x, X) k(x, X) dx
for each test function. The left side averages over exact draws; the right
side integrates the Papangelou intensity by quasi-Monte Carlo on the same
draws. |z| < 4 is reported as a pass.

Columns of gnz.csv: function, sampler, replicates, lhs, lhs_se, rhs, rhs_se,
z, pass.
",
        Experiment::EmptySpace => "\
empty_space: probability that params.region holds no point, given the
boundary. Reports the direct Monte Carlo estimate, the exponential-identity
value built from retention probabilities, the lower bound exp(-a |B|) and
the upper bounds from the intensity with an empty configuration (valid for
every cluster-local model) and with the boundary (valid under the stronger
locality only). `sandwiched` allows three standard errors.
",
        Experiment::OneArm => "\
one_arm: Boolean model of intensity params.alpha (default: the dominating
intensity of the model). For each (u, v) it estimates the probability that
the component of a point in the u-ball reaches distance v, next to the bound
from the typical point, then fits c1 exp(-c2 v) to the typical-point curve.

one_arm.csv: u, v, arm, arm_se, typical, typical_se, bound, bound_se, holds.
one_arm_fit.csv: alpha, c1, c2 and its 95% interval, possibly_supercritical
(the interval for c2 reaches zero).
",
        Experiment::Bounds => "\
bounds: thins draws of the process with params.thinning and compares the
result with a Poisson process of the estimated intensity. The total
variation distance is estimated on the window; the bound adds the intensity
discrepancy and the three correlation terms over the r and s neighbourhoods.
`holds` compares tv with the bound allowing for both standard errors.

Defaults: r_radius is the reach of the thinning, s_radius is r_radius plus
the model reach, domain_margin is s_radius plus the model reach.
",
        Experiment::Matern => "\
matern: for each n in params.ns, calibrates the Matern I exclusion radius
u_n so that n times the retention probability equals params.c, samples the
process on a window of volume n with independent blocks, thins it and
measures the distance of the retained count to Poisson with mean c times the
intensity. The slopes of log tv and log bound against log n follow.

matern.csv: n, u_n, closed-form u_n when available, calibration bracket and
check, mean_count, reference_mass, kept_fraction, tv, bound.
matern_slopes.csv: tv_slope, bound_slope, tv_monotone.
",
        Experiment::Validate => "\
validate: runs the built-in self-check over the model corpus. Exact rows
(cocycle, kernel normalisation, coupling certification, closed-form Poisson
empty space) must meet their tolerance. Statistical rows (GNZ, exponential
identity, empty-space sandwich, one-arm bound) are z-type statistics tested
against a Bonferroni threshold at family level 0.01. params.scale scales
every replicate count.
",
    }
}
