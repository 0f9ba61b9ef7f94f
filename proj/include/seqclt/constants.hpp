#pragma once

#include <sstream>
#include <string>

#include "seqclt/errors.hpp"

namespace seqclt {

/// Decay constants (theta, C2, C4, B0, D0, L0) with rho(i) = theta^i.
struct DecayConstants {
  enum class Source { Configured, Calibrated };

  double theta = 0.5;
  double C2 = 1.0;
  double C4 = 1.0;
  double B0 = 1.0;
  double D0 = 1.0;
  double L0 = 0.0;
  Source source = Source::Configured;

  void validate() const {
    if (!(theta > 0.0 && theta < 1.0)) throw ConstraintError("DecayConstants: theta must be in (0, 1)");
    if (!(C2 > 0.0 && C4 > 0.0 && B0 > 0.0 && D0 > 0.0))
      throw ConstraintError("DecayConstants: C2, C4, B0, D0 must be > 0");
    if (!(L0 >= 0.0)) throw ConstraintError("DecayConstants: L0 must be >= 0");
  }

  /// theta >= 1 / lambda_min must hold for constants attached to a schedule.
  void validate_for(double lambda_min) const {
    validate();
    if (theta < 1.0 / lambda_min) {
      std::ostringstream os;
      os << "DecayConstants: theta = " << theta << " below 1/lambda_min = " << 1.0 / lambda_min;
      throw ConstraintError(os.str());
    }
  }

  const char* source_name() const { return source == Source::Configured ? "configured" : "calibrated"; }
};

}  // namespace seqclt
