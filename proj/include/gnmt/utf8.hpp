// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gnmt::utf8 {

// Throws DecodeError on malformed input.
std::u32string decode(std::string_view s);
std::string encode(std::u32string_view s);
std::string encode(char32_t c);

// Splits on Unicode whitespace; empty fields are dropped.
std::vector<std::string> split_words(std::string_view sentence);

std::string join_words(const std::vector<std::string>& words);

}  // namespace gnmt::utf8
