#pragma once

#include <stdexcept>
#include <string>

namespace dronerf {

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No scale-space region could be found where one was required.
class NoRegionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TargetLostError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss during radiance-field training.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int iteration, int batch, const std::string& what)
      : std::runtime_error(what), iteration_(iteration), batch_(batch) {}
  int iteration() const { return iteration_; }
  int batch() const { return batch_; }

 private:
  int iteration_;
  int batch_;
};

// Pipeline failure tagged with the stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace dronerf
