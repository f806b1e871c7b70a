#include "walnet/classes.hpp"

#include "walnet/errors.hpp"

namespace walnet {

const char* label_name(int label) {
  if (label < 0 || label >= kNumClasses) {
    throw InputError("label index " + std::to_string(label) + " out of range");
  }
  return kClassNames[label];
}

int parse_label(const std::string& name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (name == kClassNames[i]) return i;
  }
  if (name == "mixed-echoic") return 2;
  throw InputError("unknown label '" + name + "' (allowed: hyperechoic, hypoechoic, mixed)");
}

}  // namespace walnet
