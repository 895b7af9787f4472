#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "specprobe/util.hpp"

namespace specprobe {

/// A closed markdown code fence. `body` is the exact text between the
/// opening line and the closing line, without the newline that precedes the
/// closing fence.
struct FencedBlock {
  std::string info;
  std::string body;
  std::size_t begin = 0;  // offset of the opening fence
  std::size_t end = 0;    // offset one past the closing fence
};

inline std::vector<FencedBlock> find_fenced_blocks(std::string_view text) {
  struct Line {
    std::size_t begin, end;  // end excludes '\n'
  };
  std::vector<Line> lines;
  for (std::size_t pos = 0; pos <= text.size();) {
    const auto nl = text.find('\n', pos);
    const auto e = nl == std::string_view::npos ? text.size() : nl;
    lines.push_back({pos, e});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }

  auto fence_len = [&](const Line& l, std::size_t& content_at) -> std::size_t {
    std::size_t i = l.begin;
    while (i < l.end && (text[i] == ' ' || text[i] == '\t')) ++i;
    std::size_t n = 0;
    while (i + n < l.end && text[i + n] == '`') ++n;
    content_at = i + n;
    return n >= 3 ? n : 0;
  };

  std::vector<FencedBlock> blocks;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::size_t info_at = 0;
    const auto open = fence_len(lines[i], info_at);
    if (!open) continue;
    const auto info = trim(text.substr(info_at, lines[i].end - info_at));
    if (info.find('`') != std::string_view::npos) continue;
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      std::size_t after = 0;
      const auto close = fence_len(lines[j], after);
      if (close >= open && trim(text.substr(after, lines[j].end - after)).empty()) {
        FencedBlock b;
        b.info = std::string(info);
        const auto body_begin = lines[i + 1].begin;
        const auto body_end = j == i + 1 ? body_begin : lines[j].begin - 1;
        b.body = std::string(text.substr(body_begin, body_end - body_begin));
        b.begin = lines[i].begin;
        b.end = lines[j].end;
        blocks.push_back(std::move(b));
        i = j;
        break;
      }
    }
  }
  return blocks;
}

}  // namespace specprobe
