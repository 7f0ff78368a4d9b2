#include "ivnmix/model_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <json.hpp>
#include <sstream>

#include "ivnmix/error.hpp"

namespace ivnmix {

using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- BIF ----

// Text formats carry rounded probabilities; close rows are rescaled and
// anything further off is left for validation to reject.
void renormalize_rows(std::vector<Cpt>& cpts) {
  for (Cpt& cpt : cpts) {
    for (std::size_t r = 0; r < cpt.rows(); ++r) {
      auto row = cpt.row(r);
      double sum = 0.0;
      for (double v : row) sum += v;
      const double dev = std::abs(sum - 1.0);
      if (dev > kProbabilityTolerance && dev <= 1e-6) {
        for (double& v : row) v /= sum;
      }
    }
  }
}

struct Token {
  std::string text;
  std::size_t line = 0;
  bool end = false;
};

class BifLexer {
 public:
  explicit BifLexer(std::string_view text) : text_(text) {}

  Token next() {
    skip_space();
    Token t;
    t.line = line_;
    if (pos_ >= text_.size()) {
      t.end = true;
      t.text = "end of input";
      return t;
    }
    const char c = text_[pos_];
    if (is_punct(c)) {
      t.text = std::string(1, c);
      ++pos_;
      return t;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && !is_punct(text_[pos_]) &&
           !starts_comment()) {
      ++pos_;
    }
    t.text = std::string(text_.substr(start, pos_ - start));
    return t;
  }

 private:
  static bool is_punct(char c) {
    switch (c) {
      case '{': case '}': case '[': case ']': case '(': case ')': case ';': case ',': case '|':
        return true;
      default:
        return false;
    }
  }

  bool starts_comment() const {
    return text_[pos_] == '%' || (text_[pos_] == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/');
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (starts_comment()) {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

class BifParser {
 public:
  explicit BifParser(std::string_view text) : lexer_(text) { advance(); }

  CausalNetwork parse() {
    while (!tok_.end) {
      if (tok_.text == "network") {
        parse_network();
      } else if (tok_.text == "variable") {
        parse_variable();
      } else if (tok_.text == "probability") {
        parse_probability();
      } else {
        fail("'network', 'variable' or 'probability'");
      }
    }
    std::vector<Cpt> cpts(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!have_cpt_[i]) throw TableShapeMismatch("variable '" + nodes_[i].name + "' has no probability block");
      cpts[i] = std::move(cpts_[i]);
    }
    renormalize_rows(cpts);
    return CausalNetwork(name_, std::move(nodes_), std::move(cpts));
  }

 private:
  void advance() { tok_ = lexer_.next(); }

  [[noreturn]] void fail(const std::string& expected) const { throw SyntaxError(tok_.line, expected, tok_.text); }

  void expect(const char* text) {
    if (tok_.end || tok_.text != text) fail(std::string("'") + text + "'");
    advance();
  }

  std::string word(const char* what) {
    if (tok_.end || (tok_.text.size() == 1 && std::string_view("{}[]();,|").find(tok_.text[0]) != std::string_view::npos)) {
      fail(what);
    }
    std::string w = tok_.text;
    advance();
    return w;
  }

  double number() {
    const Token t = tok_;
    const std::string w = word("a probability");
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size() || !std::isfinite(v)) throw SyntaxError(t.line, "a probability", w);
    return v;
  }

  void skip_property() {
    expect("property");
    while (!tok_.end && tok_.text != ";") advance();
    expect(";");
  }

  void parse_network() {
    expect("network");
    name_ = word("a network name");
    expect("{");
    while (tok_.text == "property") skip_property();
    expect("}");
  }

  void parse_variable() {
    expect("variable");
    const Token name_tok = tok_;
    NodeSpec spec;
    spec.name = word("a variable name");
    if (index_.contains(spec.name)) throw SyntaxError(name_tok.line, "a new variable name", spec.name);
    expect("{");
    while (tok_.text == "property") skip_property();
    expect("type");
    expect("discrete");
    expect("[");
    const Token count_tok = tok_;
    const std::string count_text = word("a category count");
    std::size_t count = 0;
    try {
      std::size_t used = 0;
      count = std::stoul(count_text, &used);
      if (used != count_text.size()) throw std::invalid_argument(count_text);
    } catch (const std::exception&) {
      throw SyntaxError(count_tok.line, "a category count", count_text);
    }
    expect("]");
    expect("{");
    spec.categories.push_back(word("a category label"));
    while (tok_.text == ",") {
      advance();
      spec.categories.push_back(word("a category label"));
    }
    expect("}");
    expect(";");
    while (tok_.text == "property") skip_property();
    expect("}");
    if (spec.categories.size() != count) {
      throw TableShapeMismatch("variable '" + spec.name + "' declares " + std::to_string(count) + " categories but lists " +
                               std::to_string(spec.categories.size()));
    }
    index_[spec.name] = nodes_.size();
    nodes_.push_back(std::move(spec));
    cpts_.emplace_back();
    have_cpt_.push_back(false);
  }

  std::size_t lookup(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw UndeclaredVariable("variable '" + name + "' is not declared");
    return it->second;
  }

  std::size_t category(std::size_t node, const std::string& label) const {
    const auto& cats = nodes_[node].categories;
    const auto it = std::find(cats.begin(), cats.end(), label);
    if (it == cats.end()) {
      throw TableShapeMismatch("'" + label + "' is not a category of '" + nodes_[node].name + "'");
    }
    return static_cast<std::size_t>(it - cats.begin());
  }

  std::vector<double> row_values(std::size_t k) {
    std::vector<double> row{number()};
    while (tok_.text == ",") {
      advance();
      row.push_back(number());
    }
    expect(";");
    if (row.size() != k) {
      throw TableShapeMismatch("probability row has " + std::to_string(row.size()) + " entries, expected " +
                               std::to_string(k));
    }
    return row;
  }

  void parse_probability() {
    expect("probability");
    expect("(");
    const std::size_t child = lookup(word("a variable name"));
    std::vector<std::size_t> parents;
    if (tok_.text == "|") {
      advance();
      parents.push_back(lookup(word("a parent name")));
      while (tok_.text == ",") {
        advance();
        parents.push_back(lookup(word("a parent name")));
      }
    }
    expect(")");
    if (have_cpt_[child]) throw TableShapeMismatch("variable '" + nodes_[child].name + "' has two probability blocks");
    nodes_[child].parents = parents;

    const std::size_t k = nodes_[child].cardinality();
    std::size_t rows = 1;
    for (std::size_t p : parents) rows *= nodes_[p].cardinality();
    Cpt cpt;
    cpt.cardinality = k;
    cpt.table.assign(rows * k, 0.0);
    std::vector<bool> filled(rows, false);

    expect("{");
    while (tok_.text != "}") {
      if (tok_.end) fail("'}'");
      if (tok_.text == "property") {
        skip_property();
      } else if (tok_.text == "table") {
        advance();
        if (!parents.empty()) {
          throw TableShapeMismatch("'table' form used for '" + nodes_[child].name + "', which has parents");
        }
        const std::vector<double> row = row_values(k);
        std::copy(row.begin(), row.end(), cpt.table.begin());
        filled[0] = true;
      } else if (tok_.text == "(") {
        advance();
        std::size_t r = 0;
        for (std::size_t q = 0; q < parents.size(); ++q) {
          if (q > 0) expect(",");
          r = r * nodes_[parents[q]].cardinality() + category(parents[q], word("a parent category"));
        }
        expect(")");
        if (parents.empty()) fail("'table'");
        if (filled[r]) throw TableShapeMismatch("duplicate parent configuration for '" + nodes_[child].name + "'");
        const std::vector<double> row = row_values(k);
        std::copy(row.begin(), row.end(), cpt.table.begin() + static_cast<std::ptrdiff_t>(r * k));
        filled[r] = true;
      } else {
        fail("'table', '(' or '}'");
      }
    }
    expect("}");
    for (std::size_t r = 0; r < rows; ++r) {
      if (!filled[r]) {
        throw TableShapeMismatch("probability block of '" + nodes_[child].name + "' is missing row " + std::to_string(r));
      }
    }
    cpts_[child] = std::move(cpt);
    have_cpt_[child] = true;
  }

  BifLexer lexer_;
  Token tok_;
  std::string name_ = "unnamed";
  std::vector<NodeSpec> nodes_;
  std::vector<Cpt> cpts_;
  std::vector<bool> have_cpt_;
  std::map<std::string, std::size_t> index_;
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --------------------------------------------------------------- JSON ----

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", e.what());
  }
}

const json& member(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "." + key, "missing");
  return *it;
}

template <typename T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(path, e.what());
  }
}

const json& array_at(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  return j;
}

std::string at_index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

std::size_t node_by_name(std::span<const NodeSpec> nodes, const std::string& name, const std::string& path) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == name) return i;
  }
  throw SchemaError(path, "unknown node '" + name + "'");
}

std::size_t category_by_label(const NodeSpec& node, const std::string& label, const std::string& path) {
  for (std::size_t c = 0; c < node.categories.size(); ++c) {
    if (node.categories[c] == label) return c;
  }
  throw SchemaError(path, "unknown category '" + label + "' of node '" + node.name + "'");
}

json nodes_to_json(std::span<const NodeSpec> nodes) {
  json out = json::array();
  for (const NodeSpec& n : nodes) {
    json parents = json::array();
    for (NodeId p : n.parents) parents.push_back(nodes[p].name);
    out.push_back({{"name", n.name}, {"categories", n.categories}, {"parents", parents}});
  }
  return out;
}

std::vector<NodeSpec> nodes_from_json(const json& j, const std::string& path) {
  array_at(j, path);
  std::vector<NodeSpec> nodes;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = at_index(path, i);
    NodeSpec n;
    n.name = get_as<std::string>(member(j[i], "name", p), p + ".name");
    n.categories = get_as<std::vector<std::string>>(member(j[i], "categories", p), p + ".categories");
    if (!index.try_emplace(n.name, i).second) throw SchemaError(p + ".name", "duplicate node '" + n.name + "'");
    nodes.push_back(std::move(n));
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = at_index(path, i) + ".parents";
    const auto names = get_as<std::vector<std::string>>(member(j[i], "parents", at_index(path, i)), p);
    for (const std::string& name : names) {
      const auto it = index.find(name);
      if (it == index.end()) throw SchemaError(p, "unknown parent '" + name + "'");
      nodes[i].parents.push_back(it->second);
    }
  }
  return nodes;
}

json id_to_json(const InterventionId& id, std::span<const NodeSpec> nodes) {
  if (id.is_phi()) return "phi";
  const DoTarget& t = id.target();
  return {{"node", nodes[t.node].name}, {"category", nodes[t.node].categories[t.category]}};
}

InterventionId id_from_json(const json& j, std::span<const NodeSpec> nodes, const std::string& path) {
  if (j.is_string()) {
    if (j.get<std::string>() == "phi") return InterventionId::phi();
    throw SchemaError(path, "expected \"phi\" or a {node, category} object");
  }
  const std::string name = get_as<std::string>(member(j, "node", path), path + ".node");
  const std::size_t node = node_by_name(nodes, name, path + ".node");
  const std::string label = get_as<std::string>(member(j, "category", path), path + ".category");
  return InterventionId::make_do(node, category_by_label(nodes[node], label, path + ".category"));
}

json spec_json(const MixtureSpec& spec, std::span<const NodeSpec> nodes) {
  json comps = json::array();
  comps.push_back({{"id", "phi"}, {"pi", spec.pi_phi}});
  for (NodeId i = 0; i < nodes.size(); ++i) {
    for (CategoryIndex a = 0; a < nodes[i].cardinality(); ++a) {
      comps.push_back({{"id", id_to_json(InterventionId::make_do(i, a), nodes)}, {"pi", spec.weight(DoTarget{i, a})}});
    }
  }
  return {{"components", comps}};
}

MixtureSpec spec_from(const json& j, std::span<const NodeSpec> nodes, const std::string& path) {
  const json& comps = array_at(member(j, "components", path), path + ".components");
  MixtureSpec spec;
  spec.pi_phi = 0.0;
  bool saw_phi = false;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const std::string p = at_index(path + ".components", k);
    const InterventionId id = id_from_json(member(comps[k], "id", p), nodes, p + ".id");
    const double pi = get_as<double>(member(comps[k], "pi", p), p + ".pi");
    if (id.is_phi()) {
      spec.pi_phi = pi;
      saw_phi = true;
    } else if (pi != 0.0) {
      spec.pi[id.target()] = pi;
    }
  }
  if (!saw_phi) throw SchemaError(path + ".components", "no phi component");
  return spec;
}

json table_to_json(const MarginalTable& table) {
  json out = json::array();
  for (NodeId j = 0; j < table.layout.nodes(); ++j) {
    const auto row = table.node(j);
    out.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return out;
}

MarginalTable table_from_json(const json& j, const CategoryLayout& layout, const std::string& path) {
  array_at(j, path);
  if (j.size() != layout.nodes()) throw SchemaError(path, "expected one row per node");
  MarginalTable table(layout);
  for (NodeId n = 0; n < layout.nodes(); ++n) {
    const auto row = get_as<std::vector<double>>(j[n], at_index(path, n));
    if (row.size() != layout.cardinality(n)) throw SchemaError(at_index(path, n), "wrong number of categories");
    std::copy(row.begin(), row.end(), table.values.begin() + static_cast<std::ptrdiff_t>(layout.offset(n)));
  }
  return table;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace


CausalNetwork parse_bif(std::string_view text) { return BifParser(text).parse(); }

std::string network_to_bif(const CausalNetwork& network) {
  std::ostringstream out;
  out << "network " << network.name() << " {\n}\n";
  for (const NodeSpec& n : network.nodes()) {
    out << "variable " << n.name << " {\n  type discrete [ " << n.cardinality() << " ] { ";
    for (std::size_t c = 0; c < n.cardinality(); ++c) out << (c ? ", " : "") << n.categories[c];
    out << " };\n}\n";
  }
  for (NodeId i = 0; i < network.size(); ++i) {
    const NodeSpec& n = network.node(i);
    const Cpt& cpt = network.cpt(i);
    out << "probability ( " << n.name;
    for (std::size_t q = 0; q < n.parents.size(); ++q) out << (q ? ", " : " | ") << network.node(n.parents[q]).name;
    out << " ) {\n";
    auto write_row = [&](std::size_t r) {
      const auto row = cpt.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? ", " : " ") << format_double(row[c]);
      out << ";\n";
    };
    if (n.parents.empty()) {
      out << "  table";
      write_row(0);
    } else {
      for (std::size_t r = 0; r < cpt.rows(); ++r) {
        // Decode the row index, last parent fastest.
        std::vector<std::size_t> labels(n.parents.size());
        std::size_t rem = r;
        for (std::size_t q = n.parents.size(); q-- > 0;) {
          const std::size_t card = network.cardinality(n.parents[q]);
          labels[q] = rem % card;
          rem /= card;
        }
        out << "  (";
        for (std::size_t q = 0; q < labels.size(); ++q) {
          out << (q ? ", " : "") << network.node(n.parents[q]).categories[labels[q]];
        }
        out << ")";
        write_row(r);
      }
    }
    out << "}\n";
  }
  return out.str();
}

std::string network_to_json(const CausalNetwork& network) {
  json cpts = json::array();
  for (NodeId i = 0; i < network.size(); ++i) {
    const Cpt& cpt = network.cpt(i);
    json rows = json::array();
    for (std::size_t r = 0; r < cpt.rows(); ++r) {
      const auto row = cpt.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    cpts.push_back({{"node", network.node(i).name}, {"rows", rows}});
  }
  json doc = {{"name", network.name()}, {"nodes", nodes_to_json(network.nodes())}, {"cpts", cpts}};
  return dump(doc);
}

CausalNetwork network_from_json(std::string_view text) {
  const json doc = parse_json(text);
  const std::string name = get_as<std::string>(member(doc, "name", "$"), "$.name");
  std::vector<NodeSpec> nodes = nodes_from_json(member(doc, "nodes", "$"), "$.nodes");
  const json& cpt_docs = array_at(member(doc, "cpts", "$"), "$.cpts");

  std::vector<Cpt> cpts(nodes.size());
  std::vector<bool> seen(nodes.size(), false);
  for (std::size_t k = 0; k < cpt_docs.size(); ++k) {
    const std::string p = at_index("$.cpts", k);
    const std::string node_name = get_as<std::string>(member(cpt_docs[k], "node", p), p + ".node");
    const std::size_t i = node_by_name(nodes, node_name, p + ".node");
    if (seen[i]) throw SchemaError(p + ".node", "second table for node '" + node_name + "'");
    seen[i] = true;
    const auto rows = get_as<std::vector<std::vector<double>>>(member(cpt_docs[k], "rows", p), p + ".rows");
    cpts[i].cardinality = nodes[i].cardinality();
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != nodes[i].cardinality()) {
        throw SchemaError(at_index(p + ".rows", r), "row length differs from the number of categories");
      }
      cpts[i].table.insert(cpts[i].table.end(), rows[r].begin(), rows[r].end());
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!seen[i]) throw SchemaError("$.cpts", "no table for node '" + nodes[i].name + "'");
  }
  renormalize_rows(cpts);
  return CausalNetwork(name, std::move(nodes), std::move(cpts));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

CausalNetwork load_network(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  if (path.extension() == ".bif") return parse_bif(text);
  return network_from_json(text);
}

std::string spec_to_json(const MixtureSpec& spec, std::span<const NodeSpec> nodes) {
  return dump(spec_json(spec, nodes));
}

MixtureSpec spec_from_json(std::string_view text, std::span<const NodeSpec> nodes) {
  return spec_from(parse_json(text), nodes, "$");
}

MixtureSpec any_spec_from_json(std::string_view text, std::span<const NodeSpec> nodes) {
  const json doc = parse_json(text);
  if (doc.is_object() && doc.contains("spec")) return spec_from(doc["spec"], nodes, "$.spec");
  if (doc.is_object() && doc.contains("truth")) return spec_from(doc["truth"], nodes, "$.truth");
  return spec_from(doc, nodes, "$");
}

std::vector<NodeSpec> nodes_from_spec_json(std::string_view text) {
  const json doc = parse_json(text);
  const json* spec = &doc;
  std::string path = "$";
  if (doc.is_object() && doc.contains("spec")) {
    spec = &doc["spec"];
    path = "$.spec";
  } else if (doc.is_object() && doc.contains("truth")) {
    spec = &doc["truth"];
    path = "$.truth";
  }
  const json& comps = array_at(member(*spec, "components", path), path + ".components");
  std::vector<NodeSpec> nodes;
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const std::string p = at_index(path + ".components", k);
    const json& id = member(comps[k], "id", p);
    if (id.is_string()) continue;
    const std::string name = get_as<std::string>(member(id, "node", p + ".id"), p + ".id.node");
    const std::string label = get_as<std::string>(member(id, "category", p + ".id"), p + ".id.category");
    auto it = std::find_if(nodes.begin(), nodes.end(), [&](const NodeSpec& n) { return n.name == name; });
    if (it == nodes.end()) {
      nodes.push_back(NodeSpec{name, {}, {}});
      it = nodes.end() - 1;
    }
    if (std::find(it->categories.begin(), it->categories.end(), label) == it->categories.end()) {
      it->categories.push_back(label);
    }
  }
  return nodes;
}

std::string bundle_to_json(const OracleBundle& bundle) {
  const CategoryLayout& layout = bundle.layout();
  json interventional = json::array();
  for (std::size_t k = 0; k < bundle.interventional.size(); ++k) {
    if (bundle.interventional[k].empty()) continue;
    const DoTarget t = layout.unflatten(k);
    interventional.push_back({{"id", id_to_json(InterventionId::make_do(t.node, t.category), bundle.nodes)},
                              {"table", table_to_json(bundle.interventional[k])}});
  }
  json doc = {{"nodes", nodes_to_json(bundle.nodes)},
              {"base", table_to_json(bundle.base)},
              {"interventional", interventional},
              {"mix", bundle.mix ? table_to_json(*bundle.mix) : json(nullptr)},
              {"mix_is_estimate", bundle.mix_is_estimate},
              {"sample_count", bundle.sample_count ? json(*bundle.sample_count) : json(nullptr)}};
  return dump(doc);
}

OracleBundle bundle_from_json(std::string_view text) {
  const json doc = parse_json(text);
  OracleBundle bundle;
  bundle.nodes = nodes_from_json(member(doc, "nodes", "$"), "$.nodes");
  std::vector<std::size_t> cards;
  for (const NodeSpec& n : bundle.nodes) cards.push_back(n.cardinality());
  const CategoryLayout layout(cards);
  bundle.base = table_from_json(member(doc, "base", "$"), layout, "$.base");
  bundle.interventional.assign(layout.total(), MarginalTable());
  const json& tables = array_at(member(doc, "interventional", "$"), "$.interventional");
  for (std::size_t k = 0; k < tables.size(); ++k) {
    const std::string p = at_index("$.interventional", k);
    const InterventionId id = id_from_json(member(tables[k], "id", p), bundle.nodes, p + ".id");
    if (id.is_phi()) throw SchemaError(p + ".id", "phi uses the base table");
    bundle.interventional[layout.flat(id.target().node, id.target().category)] =
        table_from_json(member(tables[k], "table", p), layout, p + ".table");
  }
  if (const auto it = doc.find("mix"); it != doc.end() && !it->is_null()) {
    bundle.mix = table_from_json(*it, layout, "$.mix");
  }
  if (const auto it = doc.find("mix_is_estimate"); it != doc.end()) {
    bundle.mix_is_estimate = get_as<bool>(*it, "$.mix_is_estimate");
  }
  if (const auto it = doc.find("sample_count"); it != doc.end() && !it->is_null()) {
    bundle.sample_count = get_as<std::size_t>(*it, "$.sample_count");
  }
  return bundle;
}

std::string instance_to_json(const ProblemInstance& instance, std::span<const NodeSpec> nodes) {
  json excluded = json::object();
  for (NodeId i = 0; i < nodes.size() && i < instance.excluded.size(); ++i) {
    excluded[nodes[i].name] = nodes[i].categories[instance.excluded[i]];
  }
  json doc = {{"n_ivn", instance.n_ivn},
              {"seed", instance.seed},
              {"excluded", excluded},
              {"truth", spec_json(instance.truth, nodes)}};
  return dump(doc);
}

ProblemInstance instance_from_json(std::string_view text, std::span<const NodeSpec> nodes) {
  const json doc = parse_json(text);
  ProblemInstance instance;
  instance.n_ivn = get_as<std::size_t>(member(doc, "n_ivn", "$"), "$.n_ivn");
  instance.seed = get_as<std::uint64_t>(member(doc, "seed", "$"), "$.seed");
  instance.truth = spec_from(member(doc, "truth", "$"), nodes, "$.truth");
  const json& excluded = member(doc, "excluded", "$");
  instance.excluded.assign(nodes.size(), 0);
  for (NodeId i = 0; i < nodes.size(); ++i) {
    const std::string p = "$.excluded." + nodes[i].name;
    const std::string label = get_as<std::string>(member(excluded, nodes[i].name.c_str(), "$.excluded"), p);
    instance.excluded[i] = category_by_label(nodes[i], label, p);
  }
  return instance;
}

std::string samples_to_csv(const CausalNetwork& network, std::span<const Assignment> samples) {
  std::string out;
  for (NodeId i = 0; i < network.size(); ++i) {
    if (i) out += ',';
    out += network.node(i).name;
  }
  out += '\n';
  for (const Assignment& x : samples) {
    for (NodeId i = 0; i < network.size(); ++i) {
      if (i) out += ',';
      out += network.node(i).categories[x[i]];
    }
    out += '\n';
  }
  return out;
}

std::vector<Assignment> samples_from_csv(std::string_view text, const CausalNetwork& network) {
  auto split = [](std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return cells;
  };

  std::vector<Assignment> samples;
  std::vector<NodeId> column_node;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (column_node.empty()) {
      for (const std::string& name : cells) column_node.push_back(network.id_of(name));
      if (column_node.size() != network.size()) {
        throw SyntaxError(line_no, "one column per node", std::to_string(cells.size()) + " columns");
      }
      continue;
    }
    if (cells.size() != column_node.size()) {
      throw SyntaxError(line_no, std::to_string(column_node.size()) + " values", std::to_string(cells.size()) + " values");
    }
    Assignment x(network.size());
    for (std::size_t c = 0; c < cells.size(); ++c) x.set(column_node[c], network.category_of(column_node[c], cells[c]));
    samples.push_back(std::move(x));
  }
  if (column_node.empty()) throw SyntaxError(line_no, "a header line", "end of input");
  return samples;
}

std::string recovery_to_json(const RecoveryResult& result, std::span<const NodeSpec> nodes) {
  json reports = json::array();
  for (const NodeRecovery& n : result.nodes) {
    json r = {{"node", nodes[n.node].name}, {"status", to_string(n.status)}};
    if (n.zero_category) r["zero_category"] = nodes[n.node].categories[*n.zero_category];
    if (n.status == NodeStatus::kRecovered) r["residual"] = n.residual;
    if (!n.message.empty()) r["message"] = n.message;
    reports.push_back(std::move(r));
  }
  json doc = {{"method", "exact"}, {"ok", result.ok()}, {"spec", spec_json(result.spec, nodes)}, {"nodes", reports}};
  return dump(doc);
}

std::string solver_report_to_json(const SolverReport& report, const OptProblem& prob, std::span<const NodeSpec> nodes) {
  json zeros = json::object();
  for (NodeId j = 0; j < prob.node_count() && j < report.zero_selection.size(); ++j) {
    const DoTarget& v = prob.variables[prob.node_begin[j] + report.zero_selection[j]];
    zeros[nodes[j].name] = nodes[j].categories[v.category];
  }
  json support = json::array();
  for (const DoTarget& t : threshold_support(prob, report.x)) {
    support.push_back(id_to_json(InterventionId::make_do(t.node, t.category), nodes));
  }
  json doc = {{"method", "dimm"},
              {"spec", spec_json(prob.to_spec(report.x), nodes)},
              {"objective", report.objective},
              {"residuals", report.residuals},
              {"max_violation", report.max_violation},
              {"iterations", report.iterations},
              {"converged", report.converged},
              {"run", report.run},
              {"lambda", prob.lambda},
              {"epsilon", prob.epsilon},
              {"zero_selection", zeros},
              {"support", support},
              {"trace", report.trace}};
  return dump(doc);
}

std::string em_result_to_json(const EmResult& result, std::span<const NodeSpec> nodes) {
  json runs = json::array();
  for (const EmRun& run : result.runs) {
    runs.push_back({{"log_likelihood", run.log_likelihood()},
                    {"iterations", run.iterations},
                    {"converged", run.converged}});
  }
  json doc = {{"method", "em"},
              {"spec", spec_json(result.best.spec, nodes)},
              {"log_likelihood", result.best.log_likelihood()},
              {"best_run", result.best_run},
              {"iterations", result.best.iterations},
              {"converged", result.best.converged},
              {"trace", result.best.trace},
              {"runs", runs}};
  return dump(doc);
}

const char* to_string(Method method) {
  switch (method) {
    case Method::kExact:
      return "exact";
    case Method::kDimm:
      return "dimm";
    case Method::kEm:
      return "em";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "exact") return Method::kExact;
  if (name == "dimm") return Method::kDimm;
  if (name == "em") return Method::kEm;
  throw RangeError("method", "unknown method '" + std::string(name) + "'");
}

void check_config(const ExperimentConfig& config) {
  if (!(config.lambda >= 0.0 && config.lambda <= 1.0)) throw RangeError("lambda", "must lie in [0, 1]");
  if (!(config.epsilon > 0.0)) throw RangeError("epsilon", "must be positive");
  if (config.restarts < 1) throw RangeError("restarts", "must be at least 1");
  if (config.em_restarts < 1) throw RangeError("em_restarts", "must be at least 1");
  if (config.instances < 1) throw RangeError("instances", "must be at least 1");
  if (config.nivn.empty()) throw RangeError("nivn", "needs at least one value");
  if (config.samples.empty()) throw RangeError("samples", "needs at least one value");
  if (config.methods.empty()) throw RangeError("method", "needs at least one method");
  for (const auto& m : config.samples) {
    if (m && *m < 1) throw RangeError("samples", "must be at least 1 when not exact");
  }
}

ExperimentConfig load_experiment_config(std::string_view text, const std::filesystem::path& base_dir) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw SchemaError("$", "expected an object");
  ExperimentConfig config;

  auto as_list = [](const json& j) { return j.is_array() ? j : json::array({j}); };

  config.network = get_as<std::string>(member(doc, "network", "$"), "$.network");
  if (!config.network.empty() && std::filesystem::path(config.network).is_relative() && !base_dir.empty()) {
    config.network = (base_dir / config.network).lexically_normal().string();
  }
  if (const auto it = doc.find("nivn"); it != doc.end()) {
    config.nivn.clear();
    const json list = as_list(*it);
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string p = at_index("$.nivn", k);
      if (!list[k].is_number_integer() || list[k].get<long long>() < 0) throw RangeError("nivn", "must be a non-negative integer");
      config.nivn.push_back(get_as<std::size_t>(list[k], p));
    }
  }
  if (const auto it = doc.find("samples"); it != doc.end()) {
    config.samples.clear();
    const json list = as_list(*it);
    for (std::size_t k = 0; k < list.size(); ++k) {
      const std::string p = at_index("$.samples", k);
      if (list[k].is_string()) {
        if (list[k].get<std::string>() != "exact") throw SchemaError(p, "expected \"exact\" or a sample count");
        config.samples.push_back(std::nullopt);
      } else if (list[k].is_number_integer()) {
        if (list[k].get<long long>() < 1) throw RangeError("samples", "must be at least 1 when not exact");
        config.samples.push_back(list[k].get<std::size_t>());
      } else {
        throw SchemaError(p, "expected \"exact\" or a sample count");
      }
    }
  }
  auto number = [&](const char* key, double& field) {
    if (const auto it = doc.find(key); it != doc.end()) field = get_as<double>(*it, std::string("$.") + key);
  };
  auto count = [&](const char* key, std::size_t& field) {
    if (const auto it = doc.find(key); it != doc.end()) {
      if (!it->is_number_integer()) throw SchemaError(std::string("$.") + key, "expected an integer");
      if (it->get<long long>() < 1) throw RangeError(key, "must be at least 1");
      field = it->get<std::size_t>();
    }
  };
  number("lambda", config.lambda);
  number("epsilon", config.epsilon);
  number("em_tolerance", config.em_tolerance);
  count("restarts", config.restarts);
  count("em_restarts", config.em_restarts);
  count("em_max_iterations", config.em_max_iterations);
  count("instances", config.instances);
  if (const auto it = doc.find("seed"); it != doc.end()) config.seed = get_as<std::uint64_t>(*it, "$.seed");
  for (const char* key : {"method", "methods"}) {
    if (const auto it = doc.find(key); it != doc.end()) {
      config.methods.clear();
      const json list = as_list(*it);
      for (std::size_t k = 0; k < list.size(); ++k) {
        config.methods.push_back(parse_method(get_as<std::string>(list[k], at_index(std::string("$.") + key, k))));
      }
    }
  }
  if (const auto it = doc.find("regularizer"); it != doc.end()) {
    const std::string r = get_as<std::string>(*it, "$.regularizer");
    if (r == "squared") {
      config.regularizer = Regularizer::kSquaredNorm;
    } else if (r == "norm") {
      config.regularizer = Regularizer::kNorm;
    } else {
      throw RangeError("regularizer", "expected \"squared\" or \"norm\"");
    }
  }
  if (const auto it = doc.find("output"); it != doc.end()) config.output = get_as<std::string>(*it, "$.output");
  if (const auto it = doc.find("trace_output"); it != doc.end()) {
    config.trace_output = get_as<std::string>(*it, "$.trace_output");
  }
  if (const auto it = doc.find("timing"); it != doc.end()) config.timing = get_as<bool>(*it, "$.timing");
  check_config(config);
  return config;
}

}  // namespace ivnmix
