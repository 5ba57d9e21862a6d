#pragma once

// Command-line front end. Every subcommand is reachable in-process through
// run(), which maps library errors onto exit codes:
//   0 success, 1 runtime or training failure, 2 usage, schema or config error.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsord::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataArgs {
  std::string data;
  std::string target;
  /// Explicit label order, comma separated.
  std::string order;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> hidden;
};

struct EvaluateArgs {
  DataArgs input;
  std::size_t folds = 10;
  std::size_t resamples = 1000;
  std::size_t jobs = 1;
  std::string out;
};

struct TrainArgs {
  DataArgs input;
  std::string out;
};

struct PredictArgs {
  std::string model;
  std::string data;
  std::string target;
  std::string out;
};

struct ProjectArgs {
  std::string model;
  DataArgs input;
  std::string out;
  /// auto, csv, svg or both.
  std::string format = "auto";
};

struct SynthArgs {
  std::size_t samples = 2000;
  long features = 5;
  long states = 8;
  double noise = 0.0;
  std::uint64_t seed = 42;
  std::string target = "y";
  std::string out;
};

struct GradcheckArgs {
  std::string model;
  std::string data;
  std::string target;
  std::size_t trials = 20;
  std::uint64_t seed = 42;
  double tolerance = 1e-5;
};

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out);
int cmd_train(const TrainArgs& args, std::ostream& out);
int cmd_predict(const PredictArgs& args, std::ostream& out);
int cmd_project(const ProjectArgs& args, std::ostream& out);
int cmd_synth(const SynthArgs& args, std::ostream& out);
int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out);

/// Parses argv and dispatches. Diagnostics go to `err` as one line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bsord::cli
