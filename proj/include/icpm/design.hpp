#pragma once

#include "icpm/config.hpp"
#include "icpm/lqr.hpp"
#include "icpm/poincare.hpp"

namespace icpm {

/// Output of the full synthesis pipeline: fixed point -> linearized return
/// map -> stabilizability -> Riccati gain -> closed-loop certificate.
struct DesignOutput {
  Vec z_star;
  LinearizedMap lin;
  StabilizabilityReport stab;
  DareSolution dare;
  CertifyReport closed_loop;
};

inline DesignOutput run_design(const ModelBundle& model, const ReducedSystem& red,
                               const OrbitSpec& orbit, const Mat& q_weight, const Mat& r_weight,
                               const LinearizeOptions& lin_opts) {
  DesignOutput out;
  FixedPointOptions fp;
  fp.lin = lin_opts;
  out.z_star = find_fixed_point(model.system, model.vhc, model.section, red, orbit, fp);
  out.lin = linearize(model.system, model.vhc, model.section, out.z_star, lin_opts);
  out.stab = stabilizability_check(out.lin.A, out.lin.B);
  if (!out.stab.stabilizable)
    fail(ErrorCode::numeric_error, "linearized return map is not stabilizable");
  LqrProblem prob{out.lin.A, out.lin.B, q_weight, r_weight};
  out.dare = dare_solve(prob);
  out.closed_loop = certify(out.lin.A, out.lin.B, out.dare.K);
  return out;
}

inline nlohmann::json design_report_json(const DesignOutput& d, const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["meta"] = meta_json(cfg.hash(), cfg.integrator.rel_tol, cfg.integrator.abs_tol, 1e-10);
  j["model"] = cfg.model;
  j["z_star"] = vector_to_json(d.z_star);
  j["A"] = matrix_to_json(d.lin.A);
  j["B"] = matrix_to_json(d.lin.B);
  j["K"] = matrix_to_json(d.dare.K);
  j["floquet_open_loop"] = complex_list_to_json(d.lin.floquet_multipliers);
  j["floquet_closed_loop"] = complex_list_to_json(d.closed_loop.eigenvalues);
  j["eps1"] = d.lin.eps1;
  j["eps2"] = d.lin.eps2;
  j["tolerances"] = {{"rel_tol", cfg.integrator.rel_tol},
                     {"abs_tol", cfg.integrator.abs_tol},
                     {"dare_residual", d.dare.residual}};
  j["controllable"] = d.stab.controllable;
  j["stabilizable"] = d.stab.stabilizable;
  j["spectral_radius_closed_loop"] = d.closed_loop.spectral_radius;
  j["stable"] = d.closed_loop.stable;
  return j;
}

/// Gains and fixed point recovered from a design report file.
struct DesignArtifacts {
  Vec z_star;
  Mat K;
};

inline DesignArtifacts parse_design_report(const nlohmann::json& j) {
  if (!j.contains("z_star") || !j.contains("K"))
    fail(ErrorCode::config_error, "design report lacks z_star or K");
  DesignArtifacts a;
  Mat z = matrix_from_json(nlohmann::json::array({j["z_star"]}));
  a.z_star = z.row(0).transpose();
  a.K = matrix_from_json(j["K"]);
  return a;
}

}  // namespace icpm
