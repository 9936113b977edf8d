#pragma once

namespace qdlab {

inline const char* version_string() { return "0.1.0"; }

}  // namespace qdlab
