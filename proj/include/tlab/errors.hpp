#pragma once

#include <stdexcept>
#include <string>

namespace tl {

// Base class for every error the library raises. name() is the stable,
// machine-readable identifier emitted by the CLI in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(what), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

#define TL_DECLARE_ERROR(Cls)                                        \
  class Cls : public Error {                                         \
   public:                                                           \
    explicit Cls(const std::string& what) : Error(#Cls, what) {}     \
  };

class CriticalityError : public Error {
 public:
  CriticalityError(double sc, const std::string& what)
      : Error("CriticalityError", what), sc_(sc) {}
  double sc() const { return sc_; }

 private:
  double sc_;
};

TL_DECLARE_ERROR(GridError)
TL_DECLARE_ERROR(DegenerateInput)
TL_DECLARE_ERROR(HankelUnsupported)
TL_DECLARE_ERROR(NoConvergence)
TL_DECLARE_ERROR(ResidualTooLarge)
TL_DECLARE_ERROR(NoUnstableEigenvalue)
TL_DECLARE_ERROR(SingularResolvent)
TL_DECLARE_ERROR(ExpansionIllConditioned)
TL_DECLARE_ERROR(SeedTooLarge)
TL_DECLARE_ERROR(LinearSolveFailure)
TL_DECLARE_ERROR(NumericalFailure)
TL_DECLARE_ERROR(NotInOrbitNeighborhood)
TL_DECLARE_ERROR(OutsideWindow)
TL_DECLARE_ERROR(PhaseAmbiguity)
TL_DECLARE_ERROR(InsufficientSamples)
TL_DECLARE_ERROR(CutoffOutOfDomain)
TL_DECLARE_ERROR(ConfigError)
TL_DECLARE_ERROR(CacheError)

#undef TL_DECLARE_ERROR

}  // namespace tl
