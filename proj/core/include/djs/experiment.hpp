#pragma once
// Experiment descriptions: a run mode plus the network, solver, replication,
// and output settings it needs, with strict JSON round-tripping (unknown
// keys are rejected with the list of valid ones).

#include <cstddef>
#include <string>
#include <vector>

#include "djs/network.hpp"
#include "djs/solver.hpp"

namespace djs {

enum class RunMode { theory, simulate, compare, validate };

struct ExperimentSpec {
  RunMode mode = RunMode::compare;
  NetworkConfig network;
  SolverConfig solver;
  std::size_t reps = 8;
  std::string output_dir = ".";
  std::vector<std::string> formats = {"csv", "json"};  // subset of csv, json

  void validate() const;
  bool wants_format(const std::string& format) const;
};

std::string run_mode_name(RunMode mode);
RunMode run_mode_from_name(const std::string& name);

std::string to_json_string(const ExperimentSpec& spec);
ExperimentSpec experiment_from_json(const std::string& text);

}  // namespace djs
