#pragma once

// HTTP-backed pieces of the knowledge module. Split from knowledge.hpp so
// that consumers without network features do not pull in the HTTP stack.

#include <httplib.h>

#include "fchprobe/knowledge.hpp"

namespace fchprobe::knowledge {

namespace detail {

// "http://host:port/path" -> {"http://host:port", "/path"}
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error("endpoint URL must include a scheme: " + url);
    auto path = url.find('/', scheme + 3);
    if (path == std::string::npos) return {url, "/"};
    return {url.substr(0, path), url.substr(path)};
}

}  // namespace detail

inline std::vector<Fact> fetch_sparql(const std::string& endpoint_url, const std::string& query_text,
                                      const SparqlColumnMapping& mapping) {
    auto [base, path] = detail::split_url(endpoint_url);
    httplib::Client client(base);
    client.set_connection_timeout(10);
    client.set_read_timeout(30);
    httplib::Params params{{"query", query_text}};
    httplib::Headers headers{{"Accept", "application/sparql-results+json"}};
    auto res = client.Get(path, params, headers);
    if (!res) throw Error("SPARQL endpoint unreachable: " + endpoint_url);
    if (res->status != 200)
        throw Error("SPARQL endpoint returned HTTP " + std::to_string(res->status));
    return parse_sparql_results(res->body, mapping);
}

}  // namespace fchprobe::knowledge
