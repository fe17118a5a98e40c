#include "mvi/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mvi/error.hpp"
#include "mvi/format.hpp"

namespace mvi {

namespace {

constexpr const char* kMagic = "mvi-checkpoint 1";

void write_matrix(std::ostream& os, const std::string& tag, const Matrix& m) {
  os << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) os << ' ';
      os << format_real(m(r, c));
    }
    os << '\n';
  }
}

std::string expect_word(std::istream& is, const std::string& want) {
  std::string w;
  if (!(is >> w) || w != want)
    throw ParseError("checkpoint: expected '" + want + "' but found '" + w + "'");
  return w;
}

Matrix read_matrix(std::istream& is, const std::string& tag) {
  expect_word(is, tag);
  std::size_t rows = 0, cols = 0;
  if (!(is >> rows >> cols)) throw ParseError("checkpoint: bad shape for " + tag);
  Matrix m(rows, cols);
  for (double& v : m.values()) {
    std::string tok;
    if (!(is >> tok)) throw ParseError("checkpoint: truncated " + tag);
    try {
      std::size_t used = 0;
      v = std::stod(tok, &used);
      if (used != tok.size()) throw ParseError("");
    } catch (const std::exception&) {
      throw ParseError("checkpoint: bad number '" + tok + "' in " + tag);
    }
  }
  return m;
}

template <class T>
T read_field(std::istream& is, const std::string& key) {
  std::string tok;
  if (!(is >> tok) || tok.rfind(key + "=", 0) != 0)
    throw ParseError("checkpoint: expected field " + key);
  const std::string value = tok.substr(key.size() + 1);
  if constexpr (std::is_same_v<T, std::string>) {
    return value;
  } else {
    try {
      return static_cast<T>(std::stoull(value));
    } catch (const std::exception&) {
      throw ParseError("checkpoint: bad value for " + key);
    }
  }
}

}  // namespace

void write_checkpoint(std::ostream& os, const Network& net) {
  os << kMagic << '\n';
  os << "layers " << net.num_layers() << '\n';
  if (net.graph()) {
    os << "graph\n";
    write_edge_list(os, *net.graph());
    os << "end-graph\n";
  } else {
    os << "no-graph\n";
  }
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const LayerSpec& s = net.spec(l);
    os << "layer filter=" << to_string(s.filter) << " activation=" << to_string(s.activation)
       << " in=" << s.in << " out=" << s.out << " bias=" << (s.bias ? 1 : 0)
       << " bn=" << to_string(s.bn) << '\n';
    write_matrix(os, "weight", net.params()[l].weight);
    write_matrix(os, "bias", net.params()[l].bias);
    const BnState& st = net.bn_states()[l];
    os << "frozen " << (st.frozen ? 1 : 0) << '\n';
    write_matrix(os, "running_mean", st.running_mean);
    write_matrix(os, "running_var", st.running_var);
  }
}

Network read_checkpoint(std::istream& is) {
  std::string line;
  std::getline(is, line);
  if (line != kMagic) throw ParseError("checkpoint: missing header");
  expect_word(is, "layers");
  std::size_t layers = 0;
  if (!(is >> layers) || layers == 0) throw ParseError("checkpoint: bad layer count");

  std::string word;
  is >> word;
  std::optional<Graph> graph;
  if (word == "graph") {
    std::string body, l;
    std::getline(is, l);
    while (std::getline(is, l) && l != "end-graph") body += l + '\n';
    if (l != "end-graph") throw ParseError("checkpoint: unterminated graph block");
    std::istringstream gs(body);
    graph = read_edge_list(gs);
  } else if (word != "no-graph") {
    throw ParseError("checkpoint: expected graph block");
  }

  std::vector<LayerSpec> specs;
  std::vector<LayerParams> params;
  std::vector<BnState> bn;
  for (std::size_t l = 0; l < layers; ++l) {
    expect_word(is, "layer");
    LayerSpec s;
    s.filter = parse_filter(read_field<std::string>(is, "filter"));
    s.activation = parse_activation(read_field<std::string>(is, "activation"));
    s.in = read_field<std::size_t>(is, "in");
    s.out = read_field<std::size_t>(is, "out");
    s.bias = read_field<std::size_t>(is, "bias") != 0;
    s.bn = parse_bn(read_field<std::string>(is, "bn"));
    specs.push_back(s);
    LayerParams p;
    p.weight = read_matrix(is, "weight");
    p.bias = read_matrix(is, "bias");
    params.push_back(std::move(p));
    BnState st;
    expect_word(is, "frozen");
    int frozen = 0;
    is >> frozen;
    st.frozen = frozen != 0;
    st.running_mean = read_matrix(is, "running_mean");
    st.running_var = read_matrix(is, "running_var");
    bn.push_back(std::move(st));
  }

  Network net(specs, std::move(graph));
  for (std::size_t l = 0; l < layers; ++l) {
    const LayerParams& want = net.params()[l];
    if (params[l].weight.rows() != want.weight.rows() ||
        params[l].weight.cols() != want.weight.cols() ||
        params[l].bias.size() != want.bias.size())
      throw ParseError("checkpoint: parameter shape mismatch in layer " + std::to_string(l));
    if (!all_finite(params[l].weight) || !all_finite(params[l].bias))
      throw ParseError("checkpoint: non-finite parameter in layer " + std::to_string(l));
    if (bn[l].running_mean.size() != net.bn_states()[l].running_mean.size() ||
        bn[l].running_var.size() != net.bn_states()[l].running_var.size())
      throw ParseError("checkpoint: BN state shape mismatch in layer " + std::to_string(l));
    net.params()[l] = std::move(params[l]);
    net.bn_states()[l] = std::move(bn[l]);
  }
  return net;
}

void save_checkpoint(const std::string& path, const Network& net) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  write_checkpoint(os, net);
  if (!os) throw Error("write failed: " + path);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return read_checkpoint(is);
}

}  // namespace mvi
