#pragma once

#include <string>
#include <vector>

#include "ambopt/instance.hpp"
#include "ambopt/model.hpp"

namespace ambopt {

class BatchInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How the per-class completion terms enter the objective. The relative
/// mode measures each call's completion against its own arrival; the
/// absolute mode keeps raw completion times and subtracts the earliest
/// arrival of the class as a constant.
enum class CompletionObjective { PerCallRelative, AbsoluteEarliest };

/// A batch of calls to be assigned and sequenced over the current fleet
/// at a single decision instant t0.
struct BatchInstance {
  const Instance* base = nullptr;
  double t0 = 0.0;
  std::vector<Call> calls;
  std::vector<AmbulanceState> fleet;
  /// Completion-class weights (three classes).
  std::vector<double> class_theta{4.0, 2.0, 1.0};
  /// Call type id -> completion class 0..2. Empty = identity (type k is
  /// class k).
  std::vector<int> type_class;
  /// 0 = derive a provably dominating bound from the instance.
  double big_m = 0.0;
  CompletionObjective objective_mode = CompletionObjective::PerCallRelative;

  int class_of(int call_type) const {
    if (type_class.empty()) return call_type;
    return type_class.at(call_type);
  }
  int classes() const { return static_cast<int>(class_theta.size()); }
  std::vector<int> compatible(const Call& c) const;
  void validate() const;
};

/// Precomputed closest-facility service profile of a call: total busy time
/// after scene arrival, the location where the ambulance frees, and the
/// scene-to-hospital lag entering the completion time (zero when the
/// patient is not transported).
struct ServiceProfile {
  double delta = 0.0;
  Location free_at;
  double tau = 0.0;
  int hospital = -1;
  int cleaning_base = -1;
};

ServiceProfile service_profile(const BatchInstance& bi, const Call& call);

/// Effective big-M for the instance: latest ambulance ready time plus all
/// service time plus one worst-case travel leg per ride.
double default_big_m(const BatchInstance& bi);

struct LinearTerm {
  int var = 0;
  double coef = 0.0;
};

struct LinearConstraint {
  std::string name;
  std::vector<LinearTerm> terms;
  char sense = '<';  // '<' (<=), '>' (>=), '=' (==)
  double rhs = 0.0;
};

struct ModelVariable {
  std::string name;
  bool binary = false;
  double lb = 0.0;
  double ub = 1.0;
  double objective = 0.0;
};

/// A mixed-binary linear program, solver-agnostic.
struct LinearModel {
  std::vector<ModelVariable> vars;
  std::vector<LinearConstraint> cons;
  double objective_constant = 0.0;

  int add_binary(const std::string& name);
  int add_continuous(const std::string& name, double lb, double ub);
  void add_constraint(LinearConstraint c) { cons.push_back(std::move(c)); }
};

/// Full model: routing, facility choice (y variables), hospital capacity,
/// big-M timing, and per-class completion bounds.
LinearModel build_full_model(const BatchInstance& bi);

/// Closest-facility variant: no y variables, service profiles folded into
/// the timing constraints.
LinearModel build_simplified_model(const BatchInstance& bi);

/// Standard LP-format text for cross-checking with external MILP solvers.
std::string export_lp(const LinearModel& model);

struct BatchSolution {
  bool feasible = false;
  bool proved_optimal = false;
  double objective = 0.0;
  /// Per-ambulance service order (call ids).
  std::vector<std::vector<int>> sequences;
  /// Scene arrival per call.
  std::vector<double> scene_arrival;
  /// Completion values per class, objective scale.
  std::vector<double> class_completion;
  long nodes = 0;
};

struct SolveOptions {
  long node_budget = 50'000'000;
};

/// Exact branch-and-bound over (assignment, per-ambulance sequence) with
/// the closest-facility timing recursion. Depth-first with a per-class
/// best-case completion bound; exhausts the tree unless the node budget
/// runs out, in which case the incumbent is returned unproved.
BatchSolution solve_exact(const BatchInstance& bi, const SolveOptions& opts = {});

/// Timing + objective for one fixed set of sequences (shared by the solver
/// and by enumeration oracles in tests).
BatchSolution evaluate_sequences(const BatchInstance& bi,
                                 const std::vector<std::vector<int>>& sequences);

std::string batch_solution_to_json(const BatchInstance& bi,
                                   const BatchSolution& sol);

BatchInstance load_batch_instance(const std::string& path, Instance& storage);
BatchInstance batch_instance_from_json_text(const std::string& text,
                                            Instance& storage,
                                            const std::string& origin);

}  // namespace ambopt
