#pragma once

namespace emshape {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace emshape
