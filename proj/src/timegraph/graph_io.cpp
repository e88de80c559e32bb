#include "mose/graph_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mose {

Json node_to_json(const NodeId& v) { return Json::array({std::string(1, kind_code(v.kind)), v.time, v.index}); }

NodeId node_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw std::domain_error("node must be [kind, time, index]: " + j.dump());
  return NodeId{kind_from_code(j[0].get<std::string>()), j[1].get<int>(), j[2].get<int>()};
}

Json nodes_to_json(const NodeSet& s) {
  Json out = Json::array();
  for (const auto& v : s) out.push_back(node_to_json(v));
  return out;
}

NodeSet nodes_from_json(const Json& j) {
  NodeSet out;
  for (const auto& e : j) out.insert(node_from_json(e));
  return out;
}

Json graph_to_json(const FullTimeGraph& g) {
  Json edges = Json::array();
  for (const auto& e : g.edges()) edges.push_back(Json::array({node_to_json(e.from), node_to_json(e.to)}));
  return Json{{"horizon", g.horizon()}, {"vars_per_step", g.vars_per_step()}, {"order", g.order()}, {"edges", edges}};
}

FullTimeGraph graph_from_json(const Json& j) {
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw std::domain_error("edge must be [from, to]: " + e.dump());
    edges.push_back({node_from_json(e[0]), node_from_json(e[1])});
  }
  return FullTimeGraph(j.at("horizon").get<int>(), j.at("vars_per_step").get<int>(), j.at("order").get<int>(),
                       std::move(edges));
}

std::string dump_canonical(const Json& j) { return j.dump() + "\n"; }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return Json::parse(buf.str());
}

void save_graph(const FullTimeGraph& g, const std::filesystem::path& path) {
  write_text_file(path, dump_canonical(graph_to_json(g)));
}

FullTimeGraph load_graph(const std::filesystem::path& path) { return graph_from_json(read_json_file(path)); }

}  // namespace mose
