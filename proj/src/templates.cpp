#include "faithlm/templates.hpp"

#include <map>

#include "faithlm/errors.hpp"

namespace faithlm::templates {

namespace detail {
const std::map<std::string, std::string_view, std::less<>>& embedded_assets();
}

std::string_view get(std::string_view name) {
  const auto& assets = detail::embedded_assets();
  auto it = assets.find(name);
  if (it == assets.end()) {
    throw Error(ErrorCode::InvalidArgument, "unknown template '" + std::string(name) + "'");
  }
  std::string_view body = it->second;
  if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  return body;
}

std::string fill(std::string_view tmpl, std::initializer_list<Slot> slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool replaced = false;
    if (tmpl[i] == '{') {
      for (const auto& [key, value] : slots) {
        if (tmpl.compare(i, key.size(), key) == 0) {
          out.append(value);
          i += key.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace faithlm::templates
