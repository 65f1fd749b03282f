// Copyright 2026 the pigpaxos authors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pigpaxos/messages.hpp"

namespace pigpaxos::wire {

// Raised on any malformed frame: length mismatch, truncation, unknown type.
struct MalformedFrame : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Frame layout: u32 big-endian length of the remainder, u8 message type, then
// the type's fields in declared order. Integers are fixed-width big-endian,
// byte strings carry a u16 length prefix, node sets are sorted u16 lists with
// a u16 count, optionals a u8 presence flag. Envelope payloads and recovered
// entry lists use u32 lengths.
std::vector<uint8_t> encode(const Message& msg);

// Decodes one full frame; throws MalformedFrame on any violation, including
// trailing bytes after the declared length.
Message decode(const std::vector<uint8_t>& frame);
Message decode(const uint8_t* data, size_t len);

// Byte size encode() would produce, for transport cost accounting.
size_t encoded_size(const Message& msg);

}  // namespace pigpaxos::wire
