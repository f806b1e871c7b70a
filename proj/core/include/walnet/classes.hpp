#pragma once

#include <array>
#include <string>

namespace walnet {

inline constexpr int kNumClasses = 3;
/// Class index order used by labels and logits.
inline constexpr std::array<const char*, kNumClasses> kClassNames{"hyperechoic", "hypoechoic",
                                                                  "mixed"};

/// Class name for a label index; throws InputError out of range.
const char* label_name(int label);
/// Inverse of label_name; throws InputError for unknown names.
int parse_label(const std::string& name);

}  // namespace walnet
