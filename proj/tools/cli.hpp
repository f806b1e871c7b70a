#pragma once

namespace walnet::cli {

/// Runs one `walnet` invocation. Returns 0 on success, 1 on a usage or
/// configuration error, 2 on a runtime failure.
int dispatch(int argc, const char* const* argv);

}  // namespace walnet::cli
