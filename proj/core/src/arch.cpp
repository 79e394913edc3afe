#include "labelsynth/arch.hpp"

#include <charconv>
#include <cmath>

#include "labelsynth/error.hpp"

namespace labelsynth {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\n' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

int parse_count(std::string_view digits, std::size_t pos, std::string_view token) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size() || value < 1)
    throw ParseError(pos, "malformed count in '" + std::string(token) + "'");
  return value;
}

LayerSpec make_conv(int kernel, int stride, int filters) {
  LayerSpec l;
  l.kind = LayerKind::conv;
  l.kernel = kernel;
  l.stride = {stride, 1};
  l.filters = filters;
  l.padding = (kernel - 1) / 2;
  l.padding_mode = PaddingMode::reflect;
  return l;
}

LayerSpec parse_generator_token(std::string_view token, std::size_t pos) {
  if (token.empty()) throw ParseError(pos, "empty token");
  const char head = token.front();
  const std::string_view rest = token.substr(1);
  switch (head) {
    case 'c': {
      // c<K>s<S>-<N>
      const auto s = rest.find('s');
      const auto dash = rest.find('-');
      if (s == std::string_view::npos || dash == std::string_view::npos || dash < s)
        throw ParseError(pos, "expected c<K>s<S>-<N>, got '" + std::string(token) + "'");
      const int k = parse_count(rest.substr(0, s), pos, token);
      const int stride = parse_count(rest.substr(s + 1, dash - s - 1), pos, token);
      const int n = parse_count(rest.substr(dash + 1), pos, token);
      if (k % 2 == 0) throw ParseError(pos, "conv kernel must be odd in '" + std::string(token) + "'");
      if (stride != 1 && stride != 2) throw ParseError(pos, "stride must be 1 or 2 in '" + std::string(token) + "'");
      LayerSpec l = make_conv(k, stride, n);
      if (stride == 2) l.kind = LayerKind::down_conv;
      return l;
    }
    case 'd': {
      LayerSpec l;
      l.kind = LayerKind::down_conv;
      l.kernel = 3;
      l.stride = {2, 1};
      l.padding = 1;
      l.filters = parse_count(rest, pos, token);
      return l;
    }
    case 'R': {
      LayerSpec l;
      l.kind = LayerKind::residual_block;
      l.kernel = 3;
      l.padding = 1;
      l.padding_mode = PaddingMode::reflect;
      l.filters = parse_count(rest, pos, token);
      return l;
    }
    case 'u': {
      LayerSpec l;
      l.kind = LayerKind::up_conv;
      l.kernel = 3;
      l.stride = {1, 2};
      l.padding = 1;
      l.filters = parse_count(rest, pos, token);
      return l;
    }
    case 'h': {
      const auto dash = rest.find('-');
      if (dash == std::string_view::npos) throw ParseError(pos, "expected h<K>-<N>, got '" + std::string(token) + "'");
      const int k = parse_count(rest.substr(0, dash), pos, token);
      if (k % 2 == 0) throw ParseError(pos, "head kernel must be odd in '" + std::string(token) + "'");
      LayerSpec l = make_conv(k, 1, parse_count(rest.substr(dash + 1), pos, token));
      l.kind = LayerKind::final_conv;
      l.norm = Norm::none;
      l.activation = Activation::none;
      return l;
    }
    default:
      throw ParseError(pos, "unknown token '" + std::string(token) + "'");
  }
}

}  // namespace

LayerGraph parse_arch(std::string_view spec) {
  spec = trim(spec);
  if (spec.empty()) throw ParseError(0, "empty architecture spec");
  LayerGraph g;

  const bool discriminator = spec.find(',') == std::string_view::npos && spec.front() == 'C';
  if (discriminator) {
    g.notation = Notation::discriminator;
    const auto tokens = split(spec, '-');
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::string_view t = trim(tokens[i]);
      if (t.empty() || t.front() != 'C') throw ParseError(i, "unknown token '" + std::string(t) + "'");
      LayerSpec l;
      l.kind = LayerKind::patch_conv;
      l.kernel = 4;
      l.stride = {2, 1};
      l.padding = 2;
      l.filters = parse_count(t.substr(1), i, t);
      l.norm = i == 0 ? Norm::none : Norm::instance;
      l.activation = Activation::leaky_relu;
      g.layers.push_back(l);
    }
    if (g.layers.size() >= 2) g.layers.back().stride = {1, 1};
    LayerSpec head;
    head.kind = LayerKind::final_conv;
    head.kernel = 4;
    head.padding = 2;
    head.filters = 1;
    head.norm = Norm::none;
    head.activation = Activation::none;
    head.implicit = true;
    g.layers.push_back(head);
    return g;
  }

  const auto tokens = split(spec, ',');
  std::optional<std::size_t> last_c;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string_view t = trim(tokens[i]);
    bool fusion = false;
    if (!t.empty() && t.back() == '+') {
      fusion = true;
      t.remove_suffix(1);
    }
    g.layers.push_back(parse_generator_token(t, i));
    if (t.front() == 'c' && g.layers.back().stride.num == 1) last_c = i;
    if (fusion) {
      if (g.fusion_point) throw ParseError(i, "more than one fusion point");
      g.fusion_point = i;
    }
  }
  if (last_c && *last_c + 1 == g.layers.size()) {
    LayerSpec& head = g.layers.back();
    head.kind = LayerKind::final_conv;
    head.norm = Norm::none;
    head.activation = Activation::tanh;
  }
  return g;
}

std::string layer_token(const LayerSpec& l, bool) {
  switch (l.kind) {
    case LayerKind::conv:
      return "c" + std::to_string(l.kernel) + "s" + std::to_string(l.stride.num) + "-" + std::to_string(l.filters);
    case LayerKind::down_conv:
      if (l.kernel != 3 || l.padding_mode == PaddingMode::reflect)
        return "c" + std::to_string(l.kernel) + "s2-" + std::to_string(l.filters);
      return "d" + std::to_string(l.filters);
    case LayerKind::residual_block:
      return "R" + std::to_string(l.filters);
    case LayerKind::up_conv:
      return "u" + std::to_string(l.filters);
    case LayerKind::patch_conv:
      return "C" + std::to_string(l.filters);
    case LayerKind::final_conv:
      if (l.implicit) return "<head " + std::to_string(l.filters) + ">";
      if (l.activation == Activation::tanh)
        return "c" + std::to_string(l.kernel) + "s1-" + std::to_string(l.filters);
      return "h" + std::to_string(l.kernel) + "-" + std::to_string(l.filters);
  }
  return "?";
}

std::string print_arch(const LayerGraph& g) {
  std::string out;
  const char sep = g.notation == Notation::discriminator ? '-' : ',';
  for (std::size_t i = 0; i < g.layers.size(); ++i) {
    if (g.layers[i].implicit) continue;
    if (!out.empty()) out += sep;
    out += layer_token(g.layers[i]);
    if (g.fusion_point && *g.fusion_point == i) out += '+';
  }
  return out;
}

LayerGraph scale_width(const LayerGraph& graph, int divisor) {
  if (divisor < 1) throw ConfigError("width divisor must be >= 1");
  LayerGraph g = graph;
  for (auto& l : g.layers)
    if (l.kind != LayerKind::final_conv) l.filters = std::max(1, l.filters / divisor);
  return g;
}

std::vector<LayerShape> infer_shapes(const LayerGraph& graph, int h, int w, int planes) {
  std::vector<LayerShape> shapes;
  shapes.reserve(graph.layers.size());
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const LayerSpec& l = graph.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + layer_token(l) + ")";
    if (h < 1 || w < 1) throw ShapeError(where + ": empty input");
    switch (l.kind) {
      case LayerKind::residual_block:
        if (planes != l.filters)
          throw ShapeError(where + ": residual block on " + std::to_string(planes) + " planes");
        break;
      case LayerKind::up_conv:
        h *= 2;
        w *= 2;
        break;
      default: {
        if (l.kind == LayerKind::down_conv && (h % 2 != 0 || w % 2 != 0))
          throw ShapeError(where + ": input " + std::to_string(h) + "x" + std::to_string(w) +
                           " not divisible by 2");
        const int s = l.stride.num;
        h = (h + 2 * l.padding - l.kernel) / s + 1;
        w = (w + 2 * l.padding - l.kernel) / s + 1;
        if (h < 1 || w < 1) throw ShapeError(where + ": output collapses to empty");
      }
    }
    planes = l.filters;
    shapes.push_back({planes, h, w});
  }
  return shapes;
}

int receptive_field(const LayerGraph& graph) {
  double r = 1.0, jump = 1.0;
  for (const auto& l : graph.layers) {
    const double s = l.stride.value();
    if (l.kind == LayerKind::residual_block) {
      r += 2.0 * (l.kernel - 1) * jump;
    } else if (s < 1.0) {
      // A fractional-strided output unit sees (k-1)*s input units.
      r += (l.kernel - 1) * s * jump;
    } else {
      r += (l.kernel - 1) * jump;
    }
    jump *= s;
  }
  return static_cast<int>(std::ceil(r - 1e-9));
}

std::int64_t layer_param_count(const LayerSpec& l, int in) {
  const std::int64_t kk = static_cast<std::int64_t>(l.kernel) * l.kernel;
  if (l.kind == LayerKind::residual_block) return 2 * (kk * l.filters * l.filters + l.filters);
  return kk * in * l.filters + l.filters;
}

std::int64_t param_count(const LayerGraph& graph, int planes) {
  std::int64_t total = 0;
  for (const auto& l : graph.layers) {
    total += layer_param_count(l, planes);
    planes = l.filters;
  }
  return total;
}

int count_kind(const LayerGraph& graph, LayerKind kind) {
  int n = 0;
  for (const auto& l : graph.layers) n += l.kind == kind;
  return n;
}

}  // namespace labelsynth
