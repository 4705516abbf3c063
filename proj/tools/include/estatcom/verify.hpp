#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace estatcom::verify {

enum class Suite { SmallSignal, TimeDomain, All };

Suite suite_from_string(const std::string& name);

/// Acceptance criteria. Every check belongs to exactly one.
enum class Criterion { Margins, Feedforward, Scenario, Inertia, Trip, Properties };

std::string to_string(Criterion c);
/// Wall-clock budget of a criterion in seconds.
double runtime_budget_s(Criterion c);

struct Check {
  Criterion criterion = Criterion::Margins;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct CriterionResult {
  Criterion criterion = Criterion::Margins;
  std::vector<Check> checks;
  double seconds = 0.0;
  bool pass() const;
};

struct Options {
  std::string out_dir;  // empty: write nothing
};

// Each runner returns the individual checks for one criterion. Runtime is
// measured by run_criterion.
std::vector<Check> check_margins(const Options& opt);
std::vector<Check> check_feedforward(const Options& opt);
std::vector<Check> check_scenario(const Options& opt);
std::vector<Check> check_inertia(const Options& opt);
std::vector<Check> check_trip(const Options& opt);
std::vector<Check> check_properties(const Options& opt);

// Individual property suites, also used by the unit tests.
Check energy_balance_property();
Check apc_identity_property();
Check feedforward_inverse_property(unsigned seed = 7, int samples = 20000);
Check frame_round_trip_property(unsigned seed = 11, int samples = 20000);
Check rational_closure_property(unsigned seed = 13, int samples = 400);
Check stability_agreement_property(unsigned seed = 17, int cases = 10);

CriterionResult run_criterion(Criterion c, const Options& opt);
std::vector<Criterion> criteria(Suite suite);
std::vector<CriterionResult> run_suite(Suite suite, const Options& opt);

/// Per-check table followed by one PASS/FAIL line per criterion.
void print_table(std::ostream& os, const std::vector<CriterionResult>& results);
bool all_pass(const std::vector<CriterionResult>& results);

}  // namespace estatcom::verify
