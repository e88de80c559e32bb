#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mose/time_graph.hpp"

namespace mose {

using Json = nlohmann::json;

// Node encoding shared by every file format: ["x", t, i], ["a", t, 0], ["r", t, 0].
Json node_to_json(const NodeId& v);
NodeId node_from_json(const Json& j);
Json nodes_to_json(const NodeSet& s);
NodeSet nodes_from_json(const Json& j);

Json graph_to_json(const FullTimeGraph& g);
FullTimeGraph graph_from_json(const Json& j);

/// Canonical text form: keys sorted, compact, trailing newline. Loading and
/// re-saving reproduces the same bytes.
std::string dump_canonical(const Json& j);

void save_graph(const FullTimeGraph& g, const std::filesystem::path& path);
FullTimeGraph load_graph(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mose
