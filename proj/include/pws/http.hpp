#pragma once

// HTTP transport for Service: every message is a POST to /rpc with a JSON
// body, answered with status 200 and a JSON body.

#include <httplib.h>

#include <charconv>
#include <string>

#include "pws/server.hpp"

namespace pws {

class HttpFrontEnd {
 public:
  explicit HttpFrontEnd(Service& service) : service_(service) {
    // No SO_REUSEPORT: a second server on a taken port must fail to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    server_.Post("/rpc", [this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(service_.handle_text(req.body), "application/json");
    });
  }

  // Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) fail(ErrorCode::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  // Blocks until stop() is called.
  void run() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  Service& service_;
  httplib::Server server_;
};

// "host:port" with the host defaulting to 127.0.0.1.
inline std::pair<std::string, int> parse_bind_address(const std::string& text) {
  auto colon = text.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : text.substr(0, colon);
  std::string port = colon == std::string::npos ? text : text.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  int value = -1;
  auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || end != port.data() + port.size() || value < 0 || value > 65535)
    fail(ErrorCode::BindFailure, "bad bind address '" + text + "'");
  return {host, value};
}

}  // namespace pws
