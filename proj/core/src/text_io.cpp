#include "evorep/text_io.hpp"

#include <charconv>
#include <string>
#include <system_error>

#include "evorep/errors.hpp"

namespace evorep {

std::string format_double(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw DataError("format_double: conversion failed");
  return std::string(buf, end);
}

double parse_double(std::string_view token, std::string_view context) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r'))
    token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
    throw DataError("non-numeric value '" + std::string(token) + "' in " + std::string(context));
  }
  return value;
}

}  // namespace evorep
