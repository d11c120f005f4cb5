#include "driftbench/classifier.hpp"

#include "driftbench/error.hpp"

#include <charconv>
#include <string>

namespace driftbench {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

HeadSpec HeadSpec::parse(std::string_view text) {
  HeadSpec spec;
  if (text == "MeanLayer") {
    spec.family = HeadFamily::mean;
  } else if (text == "MedianLayer") {
    spec.family = HeadFamily::median;
  } else if (text == "SLDA") {
    spec.family = HeadFamily::slda;
  } else if (text == "KNN" || text.starts_with("KNN:")) {
    spec.family = HeadFamily::knn;
    if (text.size() > 4) {
      const auto digits = text.substr(4);
      std::size_t k = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
      if (ec != std::errc() || ptr != digits.data() + digits.size() || k == 0) {
        throw ConfigError("invalid KNN neighbour count in '" + std::string(text) + "'");
      }
      spec.k = k;
    }
  } else {
    spec.family = HeadFamily::gradient;
    const auto plus = text.find('+');
    spec.kind = parse_head_kind(text.substr(0, plus));
    if (plus != std::string_view::npos) spec.mask = parse_mask_mode(text.substr(plus + 1));
  }
  return spec;
}

std::string HeadSpec::head_name() const {
  switch (family) {
    case HeadFamily::gradient: return std::string(driftbench::to_string(kind));
    case HeadFamily::knn: return "KNN:" + std::to_string(k);
    case HeadFamily::mean: return "MeanLayer";
    case HeadFamily::median: return "MedianLayer";
    case HeadFamily::slda: return "SLDA";
  }
  return "unknown";
}

std::string HeadSpec::mask_name() const { return std::string(driftbench::to_string(mask)); }

std::string HeadSpec::to_string() const {
  if (family == HeadFamily::gradient && mask != MaskMode::none) return head_name() + "+" + mask_name();
  return head_name();
}

Classifier make_classifier(const HeadSpec& spec, std::size_t num_classes, std::size_t dim,
                           std::uint64_t seed) {
  switch (spec.family) {
    case HeadFamily::gradient: return init_head(spec.kind, num_classes, dim, seed, spec.mask);
    case HeadFamily::knn: return KnnHead(num_classes, dim, spec.k);
    case HeadFamily::mean: return PrototypeHead(num_classes, dim, PrototypeMode::mean);
    case HeadFamily::median: return PrototypeHead(num_classes, dim, PrototypeMode::median);
    case HeadFamily::slda: return SldaHead(num_classes, dim);
  }
  throw ConfigError("unknown head family");
}

std::uint32_t predict(const Classifier& head, const Vector& z) {
  return std::visit(overloaded{[&](const GradientHead& h) { return predict(h, z); },
                               [&](const auto& h) { return h.predict(z); }},
                    head);
}

std::size_t num_classes(const Classifier& head) {
  return std::visit([](const auto& h) { return h.num_classes(); }, head);
}

std::size_t dim(const Classifier& head) {
  return std::visit([](const auto& h) { return h.dim(); }, head);
}

bool is_gradient(const Classifier& head) { return std::holds_alternative<GradientHead>(head); }

}  // namespace driftbench
