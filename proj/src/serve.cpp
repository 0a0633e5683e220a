#include "rexnet/serve.hpp"

#include <spdlog/spdlog.h>

#include "rexnet/error.hpp"

namespace rexnet::serve {

std::unique_ptr<httplib::Server> make_server(const std::filesystem::path& bundle_dir) {
  if (!std::filesystem::exists(bundle_dir / "index.json"))
    throw Error("no index.json in " + bundle_dir.string() + "; run `rexnet explain` first");
  auto server = std::make_unique<httplib::Server>();
  // No SO_REUSEPORT, so a second server on a taken port fails to bind.
  server->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  server->set_file_extension_and_mimetype_mapping("json", "application/json");
  server->set_file_extension_and_mimetype_mapping("wav", "audio/wav");
  if (!server->set_mount_point("/", bundle_dir.string()))
    throw Error("cannot serve " + bundle_dir.string());
  server->set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });
  return server;
}

void run(httplib::Server& server, const std::string& host, int port) {
  if (!server.bind_to_port(host, port))
    throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
  spdlog::info("serving on http://{}:{}/", host, port);
  server.listen_after_bind();
}

}  // namespace rexnet::serve
