#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace stressorlens::csv {

// Splits one RFC 4180 record. Quoted fields may contain commas and doubled quotes;
// embedded newlines are not supported.
std::vector<std::string> split_record(std::string_view line);

// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest round-trip representation of a double.
std::string format_double(double value);

}  // namespace stressorlens::csv
