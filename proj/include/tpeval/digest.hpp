#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

namespace tpeval {

// SHA-256 hex digest of the input bytes.
std::string sha256_hex(std::string_view data);

// Short (16 hex chars) digest used for candidate ids, run ids and file names.
// Fields are joined with a 0x1f separator so concatenation is unambiguous.
std::string short_digest(std::initializer_list<std::string_view> fields);

}  // namespace tpeval
