#pragma once

#include <filesystem>
#include <memory>

#include "httplib.h"

namespace rexnet::serve {

// Read-only static server over a bundle directory. Throws Error when the
// directory lacks index.json.
std::unique_ptr<httplib::Server> make_server(const std::filesystem::path& bundle_dir);

// Binds and blocks until stopped. Throws Error when the port is taken.
void run(httplib::Server& server, const std::string& host, int port);

}  // namespace rexnet::serve
