#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <string>

#include "tradelab/error.hpp"
#include "tradelab/market_data.hpp"

namespace tradelab {

HttpGet make_https_transport(const std::string& host) {
  return [host](const std::string& path, const QueryParams& params) {
    httplib::SSLClient client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Params query(params.begin(), params.end());
    auto result = client.Get(path, query, httplib::Headers{});
    if (!result) {
      throw Error(Errc::NetworkError, "GET " + host + path + " failed: " + httplib::to_string(result.error()));
    }
    HttpResponse response;
    response.status = result->status;
    response.body = result->body;
    if (result->has_header("Retry-After")) {
      try {
        response.retry_after = std::stod(result->get_header_value("Retry-After"));
      } catch (const std::exception&) {
        response.retry_after = -1.0;
      }
    }
    return response;
  };
}

}  // namespace tradelab
