#pragma once

#include <stdexcept>
#include <string>

#include "rbdpipe/model.hpp"

namespace rbdpipe {

/// Raised on malformed model documents; the message names the offending
/// link where one is known.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse and validate a model document (JSON text). Links may appear in any
/// order; they are re-indexed topologically. With root_mode
/// "floating_split" the base link receives a 6-DOF virtual joint.
RobotModel parse_model(const std::string& text);

/// Load a model document from a file path.
RobotModel load_model(const std::string& path);

}  // namespace rbdpipe
