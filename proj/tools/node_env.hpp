#pragma once

#include <string>

#include "flamesh/apps.hpp"

namespace flamesh::tools {

// Environment knobs shared by the node runner and the CLI:
//   FLAMESH_SELF_IP          address this node binds (default: master IP)
//   FLAMESH_RECV_TIMEOUT_MS  per-receive timeout (default 30000, 0 = forever)
//   FLAMESH_CONNECT_ATTEMPTS connect attempts per message (default 20)
//   FLAMESH_READINGS         "id=value,..." temperature overrides for example1
TestbedOptions options_from_env();
apps::ReadingSource readings_from_env();

/// Parses "1=21.5,2=19.0".
apps::ReadingSource parse_readings(const std::string& text);

}  // namespace flamesh::tools
