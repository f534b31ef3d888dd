#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace qprobe {

struct PreprocessOptions {
  // Drop a leading RFC-822 style header block, keeping only the Subject value.
  bool strip_headers = true;
  // Drop whitespace-delimited chunks that look like e-mail addresses.
  bool remove_emails = true;
  // Replace ASCII punctuation with whitespace.
  bool remove_punctuation = true;
  // ASCII case folding.
  bool lowercase = true;

  friend bool operator==(const PreprocessOptions&, const PreprocessOptions&) = default;
};

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

inline bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

inline bool is_blank_line(std::string_view line) {
  for (char c : line) {
    if (!is_space(c)) return false;
  }
  return true;
}

// "Name: value" where Name is [A-Za-z][A-Za-z0-9-]*. Returns the name length, or 0.
inline std::size_t header_name_length(std::string_view line) {
  if (line.empty() || !std::isalpha(static_cast<unsigned char>(line[0]))) return 0;
  std::size_t i = 1;
  while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '-')) ++i;
  if (i >= line.size() || line[i] != ':') return 0;
  if (i + 1 < line.size() && !is_space(line[i + 1])) return 0;
  return i;
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  }
  return true;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

// Removes the header block at the top of a message. Only the Subject value
// (with its continuation lines) survives.
inline std::string strip_header_block(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.empty() || header_name_length(lines.front()) == 0) return std::string(text);

  std::string out;
  std::size_t i = 0;
  bool in_subject = false;
  for (; i < lines.size(); ++i) {
    auto line = lines[i];
    if (is_blank_line(line)) {
      ++i;
      break;
    }
    if (!is_space(line.front())) {
      auto name_len = header_name_length(line);
      if (name_len == 0) break;  // not a header after all; treat as body
      in_subject = iequals(line.substr(0, name_len), "subject");
      if (in_subject) {
        out.append(line.substr(name_len + 1));
        out.push_back('\n');
      }
    } else if (in_subject) {
      out.append(line);
      out.push_back('\n');
    }
  }
  for (; i < lines.size(); ++i) {
    out.append(lines[i]);
    out.push_back('\n');
  }
  return out;
}

inline bool looks_like_email(std::string_view chunk) {
  auto at = chunk.find('@');
  while (at != std::string_view::npos) {
    if (at > 0 && at + 1 < chunk.size() && !is_punct(chunk[at - 1]) && !is_punct(chunk[at + 1])) return true;
    at = chunk.find('@', at + 1);
  }
  return false;
}

}  // namespace detail

/// Turns raw document text into a token list: optional header stripping,
/// e-mail removal, punctuation removal and case folding, then whitespace
/// splitting. Deterministic for a fixed input and option set.
inline std::vector<std::string> preprocess(std::string_view raw, const PreprocessOptions& options = {}) {
  std::string text = options.strip_headers ? detail::strip_header_block(raw) : std::string(raw);

  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && detail::is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !detail::is_space(text[i])) ++i;
    std::string_view chunk(text.data() + start, i - start);
    if (chunk.empty()) continue;
    if (options.remove_emails && detail::looks_like_email(chunk)) continue;

    for (char c : chunk) {
      if (options.remove_punctuation && detail::is_punct(c)) {
        flush();
        continue;
      }
      const auto u = static_cast<unsigned char>(c);
      current.push_back(options.lowercase && u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
    }
    flush();
  }
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens, char sep = ' ') {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(sep);
    out += tokens[i];
  }
  return out;
}

}  // namespace qprobe
