#include <cstdlib>

#include <httplib.h>

#include "crs/augment.hpp"
#include "crs/errors.hpp"

namespace crs::augment {

HttpGenerator::HttpGenerator(std::string url, std::string token) : token_(std::move(token)) {
    constexpr std::string_view kScheme = "http://";
    if (!url.starts_with(kScheme))
        throw InputError("generator URL must start with http:// (got '" + url + "')");
    const auto slash = url.find('/', kScheme.size());
    host_ = slash == std::string::npos ? url : url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

HttpGenerator HttpGenerator::from_env() {
    const char* url = std::getenv("CRS_GENERATOR_URL");
    if (url == nullptr || *url == '\0') throw InputError("CRS_GENERATOR_URL is not set");
    const char* token = std::getenv("CRS_GENERATOR_TOKEN");
    return HttpGenerator(url, token ? token : "");
}

std::vector<std::string> HttpGenerator::generate(const GenerationRequest& request) {
    httplib::Client client(host_);
    client.set_read_timeout(300, 0);
    httplib::Headers headers{{"X-Candidate-Count", std::to_string(request.count)}, {"X-Item-Id", request.item_id}};
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = client.Post(path_, headers, request.prompt, "text/plain");
    if (!res) throw std::runtime_error("generator request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw std::runtime_error("generator returned HTTP " + std::to_string(res->status));
    return split_candidates(res->body);
}

}  // namespace crs::augment
