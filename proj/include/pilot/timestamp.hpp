#pragma once

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "pilot/error.hpp"

namespace pilot {

// A calendar day, stored as days since 01/01/1970. Concrete syntax is DD/MM/YYYY.
class Timestamp {
 public:
  constexpr Timestamp() = default;
  constexpr explicit Timestamp(std::int64_t days) : days_(days) {}

  static std::optional<Timestamp> from_date(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                             std::chrono::day{day}};
    if (!ymd.ok()) return std::nullopt;
    const auto count = sys_days{ymd}.time_since_epoch().count();
    if (count < 0) return std::nullopt;
    return Timestamp{count};
  }

  static std::optional<Timestamp> try_parse(std::string_view text) {
    unsigned day = 0;
    unsigned month = 0;
    int year = 0;
    auto read = [&text](auto& out, std::size_t min_digits, std::size_t max_digits) {
      std::size_t n = 0;
      while (n < text.size() && n < max_digits && text[n] >= '0' && text[n] <= '9') ++n;
      if (n < min_digits) return false;
      std::from_chars(text.data(), text.data() + n, out);
      text.remove_prefix(n);
      return true;
    };
    auto slash = [&text] {
      if (text.empty() || text.front() != '/') return false;
      text.remove_prefix(1);
      return true;
    };
    if (!read(day, 1, 2) || !slash() || !read(month, 1, 2) || !slash() || !read(year, 4, 4) ||
        !text.empty()) {
      return std::nullopt;
    }
    return from_date(year, month, day);
  }

  static Timestamp parse(std::string_view text) {
    if (auto t = try_parse(text)) return *t;
    throw ValidationError("invalid-date", "invalid date '" + std::string(text) +
                                              "', expected a calendar date as DD/MM/YYYY");
  }

  constexpr std::int64_t days() const { return days_; }

  std::string to_string() const {
    using namespace std::chrono;
    const year_month_day ymd{sys_days{std::chrono::days{days_}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", static_cast<unsigned>(ymd.day()),
                  static_cast<unsigned>(ymd.month()), static_cast<int>(ymd.year()));
    return buf;
  }

  friend constexpr auto operator<=>(const Timestamp&, const Timestamp&) = default;

 private:
  std::int64_t days_ = 0;
};

}  // namespace pilot
