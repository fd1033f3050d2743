#include "impspec/simulators.hpp"

#include <cmath>
#include <stdexcept>

#include "impspec/rng.hpp"

namespace impspec {

namespace {

// 10 * (1, 1.75, 2.5, 3.25, 4): the frequency grid is uniformly spaced; the
// third step is 3.25 (a decimal, not the pair "3, 25").
const double kAblationFreq[5] = {10.0, 17.5, 25.0, 32.5, 40.0};
const double kAblationBeta[5] = {1.0, 0.5, 1.0 / 3.0, 0.25, 0.2};

constexpr long kCalibrationDraws = 1000000;
constexpr std::uint64_t kCalibrationSeed = 0x5eedcafeULL;

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

struct Welford {
  long n = 0;
  double mean = 0.0, m2 = 0.0;
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

struct HealthDraw {
  double age, bmi, aspirin, statin, cancer, psa;
};

HealthDraw draw_health(Rng& rng, bool binary, double statin_override,
                       bool use_override) {
  HealthDraw h;
  h.age = rng.uniform(15.0, 75.0);
  h.bmi = rng.normal(27.0 - 0.01 * h.age, std::sqrt(0.7));
  const double p_asp = sigmoid(-8.0 + 0.1 * h.age + 0.03 * h.bmi);
  const double p_sta = sigmoid(-13.0 + 0.1 * h.age + 0.2 * h.bmi);
  h.aspirin = binary ? (rng.uniform() < p_asp ? 1.0 : 0.0) : p_asp;
  h.statin = binary ? (rng.uniform() < p_sta ? 1.0 : 0.0) : p_sta;
  if (use_override) h.statin = statin_override;
  const double p_can = sigmoid(2.2 - 0.05 * h.age + 0.01 * h.bmi - 0.04 * h.statin +
                               0.02 * h.aspirin);
  h.cancer = binary ? (rng.uniform() < p_can ? 1.0 : 0.0) : p_can;
  h.psa = rng.normal(6.8 + 0.04 * h.age - 0.15 * h.bmi - 0.6 * h.statin +
                         0.55 * h.aspirin + h.cancer,
                     std::sqrt(0.4));
  return h;
}

double healthcare_psa_var(bool binary) {
  Rng rng(sub_seed(kCalibrationSeed, binary ? 2 : 1));
  Welford acc;
  for (long i = 0; i < kCalibrationDraws; ++i)
    acc.add(draw_health(rng, binary, 0.0, false).psa);
  return acc.variance();
}

struct SynthDraw {
  double a, b, c, d, e, y;
};

SynthDraw draw_synth(Rng& rng) {
  SynthDraw s;
  const double u1 = rng.normal();
  const double u2 = rng.normal();
  const double f = rng.normal();
  s.a = f * f + u1 + rng.normal();
  s.b = u2 + rng.normal();
  s.c = std::exp(-s.b) + rng.normal();
  s.d = std::exp(-s.c) / 10.0 + rng.normal();
  s.e = std::cos(s.a) + (s.c / 10.0) * rng.normal();
  s.y = std::cos(s.d) + std::sin(s.e) + u1 + u2 * rng.normal();
  return s;
}

Dataset simulate_ablation(const DgpSpec& spec) {
  const AblationNoise& nz = ablation_noise();
  const Eigen::VectorXd sx = nz.sigma2_x.cwiseSqrt();
  const double sy = std::sqrt(nz.sigma2_y);

  auto draw_table = [&](Rng& rng, bool with_y, bool with_z) {
    Table t;
    const Eigen::Index cols = 5 + (with_y ? 1 : 0) + (with_z ? 1 : 0);
    t.values.resize(spec.n, cols);
    if (with_y) t.names.push_back("Y");
    for (int d = 0; d < 5; ++d) t.names.push_back("X" + std::to_string(d + 1));
    if (with_z) t.names.push_back("Z");
    for (Eigen::Index i = 0; i < spec.n; ++i) {
      const double z = rng.uniform();
      double x[5];
      for (int d = 0; d < 5; ++d)
        x[d] = std::sin(kAblationFreq[d] * z) + sx[d] * rng.normal();
      Eigen::Index c = 0;
      if (with_y) {
        double f = 0.0;
        for (int d = 0; d < 5; ++d) f += kAblationBeta[d] * std::sin(x[d]);
        t.values(i, c++) = f + sy * rng.normal();
      }
      for (int d = 0; d < 5; ++d) t.values(i, c++) = x[d];
      if (with_z) t.values(i, c++) = z;
    }
    return t;
  };

  Dataset ds;
  Rng r1(sub_seed(spec.seed, 1));
  Rng r2(sub_seed(spec.seed, 2));
  ds.d1 = draw_table(r1, true, false);
  ds.d2 = draw_table(r2, false, true);
  ds.roles.y = "Y";
  ds.roles.v = {"X1", "X2", "X3", "X4", "X5"};
  ds.roles.z = {"Z"};
  return ds;
}

Dataset simulate_synthetic(const DgpSpec& spec) {
  Dataset ds;
  Rng rng(sub_seed(spec.seed, 1));
  Table t;
  t.names = {"A", "B", "C", "D", "E", "Y"};
  t.values.resize(spec.n, 6);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const SynthDraw s = draw_synth(rng);
    t.values.row(i) << s.a, s.b, s.c, s.d, s.e, s.y;
  }
  ds.d1 = std::move(t);
  ds.roles.y = "Y";
  ds.roles.w = {"D", "B"};
  ds.roles.v = {"C"};
  ds.roles.z = {"B"};
  return ds;
}

Dataset simulate_healthcare(const DgpSpec& spec) {
  const double su = std::sqrt(healthcare_vol_noise_var(spec.binary_treatments));
  Dataset ds;

  Rng r1(sub_seed(spec.seed, 1));
  Table t1;
  t1.names = {"VOL", "PSA"};
  t1.values.resize(spec.n, 2);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const HealthDraw h = draw_health(r1, spec.binary_treatments, 0.0, false);
    t1.values(i, 0) = h.psa + su * r1.normal();
    t1.values(i, 1) = h.psa;
  }

  Rng r2(sub_seed(spec.seed, 2));
  Table t2;
  t2.names = {"PSA", "STATIN", "AGE", "BMI"};
  t2.values.resize(spec.n, 4);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const HealthDraw h = draw_health(r2, spec.binary_treatments, 0.0, false);
    t2.values.row(i) << h.psa, h.statin, h.age, h.bmi;
  }

  ds.d1 = std::move(t1);
  ds.d2 = std::move(t2);
  ds.roles.y = "VOL";
  ds.roles.v = {"PSA"};
  ds.roles.z = {"STATIN", "AGE", "BMI"};
  return ds;
}

}  // namespace

const AblationNoise& ablation_noise() {
  static const AblationNoise noise = [] {
    AblationNoise nz;
    Rng rng(kCalibrationSeed);
    Welford acc[5];
    for (long i = 0; i < kCalibrationDraws; ++i) {
      const double z = rng.uniform();
      for (int d = 0; d < 5; ++d) acc[d].add(std::sin(kAblationFreq[d] * z));
    }
    nz.sigma2_x.resize(5);
    for (int d = 0; d < 5; ++d) nz.sigma2_x[d] = acc[d].variance() / 2.0;
    Welford fy;
    for (long i = 0; i < kCalibrationDraws; ++i) {
      const double z = rng.uniform();
      double f = 0.0;
      for (int d = 0; d < 5; ++d) {
        const double x =
            std::sin(kAblationFreq[d] * z) + std::sqrt(nz.sigma2_x[d]) * rng.normal();
        f += kAblationBeta[d] * std::sin(x);
      }
      fy.add(f);
    }
    nz.sigma2_y = fy.variance() / 2.0;
    return nz;
  }();
  return noise;
}

double healthcare_vol_noise_var(bool binary_treatments) {
  static const double cont = healthcare_psa_var(false) * (1.0 / 0.13 - 1.0);
  static const double bin = healthcare_psa_var(true) * (1.0 / 0.13 - 1.0);
  return binary_treatments ? bin : cont;
}

Dataset simulate(const DgpSpec& spec) {
  if (spec.n < 2) throw std::invalid_argument("simulate: n must be >= 2");
  if (spec.name == "ablation") return simulate_ablation(spec);
  if (spec.name == "synthetic") return simulate_synthetic(spec);
  if (spec.name == "healthcare") return simulate_healthcare(spec);
  throw std::invalid_argument("simulate: unknown dgp " + spec.name);
}

CausalQuery default_query(const DgpSpec& spec) {
  CausalQuery q;
  if (spec.name == "ablation") {
    q.estimand = Estimand::Ate;
    q.roles.y = "Y";
    q.roles.v = {"X1", "X2", "X3", "X4", "X5"};
    q.roles.z = {"Z"};
    q.fusion = true;
  } else if (spec.name == "synthetic") {
    q.estimand = Estimand::Cate;
    q.roles.y = "Y";
    q.roles.w = {"D", "B"};
    q.roles.v = {"C"};
    q.roles.z = {"B"};
    q.fusion = false;
  } else if (spec.name == "healthcare") {
    q.estimand = Estimand::Ate;
    q.roles.y = "VOL";
    q.roles.v = {"PSA"};
    q.roles.z = {"STATIN", "AGE", "BMI"};
    q.fusion = true;
  } else {
    throw std::invalid_argument("default_query: unknown dgp " + spec.name);
  }
  return q;
}

Eigen::VectorXd oracle_effect(const DgpSpec& spec, Estimand estimand,
                              const Eigen::MatrixXd& points, long n_mc,
                              std::uint64_t seed) {
  if (n_mc <= 0) throw std::invalid_argument("oracle_effect: n_mc <= 0");
  Eigen::VectorXd out(points.rows());

  if (spec.name == "ablation") {
    const AblationNoise& nz = ablation_noise();
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
      // one stream shared by every point: differences between points are then
      // free of independent MC noise, so curve shape and argmin are exact
      Rng rng(seed);
      const double z = points(p, 0);
      double acc = 0.0;
      for (long s = 0; s < n_mc; ++s) {
        double f = 0.0;
        for (int d = 0; d < 5; ++d) {
          const double x = std::sin(kAblationFreq[d] * z) +
                           std::sqrt(nz.sigma2_x[d]) * rng.normal();
          f += kAblationBeta[d] * std::sin(x);
        }
        acc += f;
      }
      out[p] = acc / static_cast<double>(n_mc);
    }
    return out;
  }

  if (spec.name == "synthetic") {
    if (points.cols() != 2)
      throw std::invalid_argument("oracle_effect: synthetic points need 2 columns");
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
      // one stream shared by every point: differences between points are then
      // free of independent MC noise, so curve shape and argmin are exact
      Rng rng(seed);
      double acc = 0.0;
      if (estimand == Estimand::Cate) {
        // E[Y | do(D=d), B=b]: C from P(C|B=b), A from its marginal, then E
        const double d = points(p, 0), b = points(p, 1);
        for (long s = 0; s < n_mc; ++s) {
          const double c = std::exp(-b) + rng.normal();
          const double a = [&] {
            const double f = rng.normal();
            return f * f + rng.normal() + rng.normal();
          }();
          const double e = std::cos(a) + (c / 10.0) * rng.normal();
          acc += std::cos(d) + std::sin(e);
        }
      } else if (estimand == Estimand::Att) {
        // E[Y | do(B=b), B=b']: C from P(C|B=b), then D and E downstream
        const double b = points(p, 0);
        for (long s = 0; s < n_mc; ++s) {
          const double c = std::exp(-b) + rng.normal();
          const double a = [&] {
            const double f = rng.normal();
            return f * f + rng.normal() + rng.normal();
          }();
          const double e = std::cos(a) + (c / 10.0) * rng.normal();
          const double d = std::exp(-c) / 10.0 + rng.normal();
          acc += std::cos(d) + std::sin(e);
        }
      } else {
        throw std::invalid_argument("oracle_effect: synthetic supports cate/att");
      }
      out[p] = acc / static_cast<double>(n_mc);
    }
    return out;
  }

  if (spec.name == "healthcare") {
    const double su = std::sqrt(healthcare_vol_noise_var(spec.binary_treatments));
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
      // one stream shared by every point: differences between points are then
      // free of independent MC noise, so curve shape and argmin are exact
      Rng rng(seed);
      const double s_val = points(p, 0);
      double acc = 0.0;
      for (long s = 0; s < n_mc; ++s) {
        const HealthDraw h = draw_health(rng, spec.binary_treatments, s_val, true);
        acc += h.psa + su * rng.normal();
      }
      out[p] = acc / static_cast<double>(n_mc);
    }
    return out;
  }

  throw std::invalid_argument("oracle_effect: unknown dgp " + spec.name);
}

}  // namespace impspec
