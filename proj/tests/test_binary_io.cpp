#include <gtest/gtest.h>

#include <limits>

#include "sga/binary_io.hpp"

using sga::FormatError;
using sga::io::ByteReader;
using sga::io::ByteWriter;

TEST(BinaryIo, LittleEndianLayout) {
    ByteWriter w;
    w.u32(0x01020304u);
    const auto& b = w.buffer();
    ASSERT_EQ(b.size(), 4u);
    EXPECT_EQ(b[0], 0x04);
    EXPECT_EQ(b[3], 0x01);
}

TEST(BinaryIo, RoundTrip) {
    ByteWriter w;
    w.bytes("ABCD");
    w.u8(200);
    w.u32(123456789u);
    w.u64(0xfedcba9876543210ull);
    w.f64(-0.1);
    w.f64(std::numeric_limits<double>::denorm_min());
    ByteReader r(w.buffer());
    r.expect_magic("ABCD");
    EXPECT_EQ(r.u8("a"), 200);
    EXPECT_EQ(r.u32("b"), 123456789u);
    EXPECT_EQ(r.u64("c"), 0xfedcba9876543210ull);
    EXPECT_EQ(r.f64("d"), -0.1);
    EXPECT_EQ(r.f64("e"), std::numeric_limits<double>::denorm_min());
    EXPECT_NO_THROW(r.expect_end());
}

TEST(BinaryIo, TruncationNamesField) {
    ByteWriter w;
    w.u8(1);
    w.u8(2);
    ByteReader r(w.buffer());
    try {
        r.u32("sample count");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatError::Kind::truncated);
        EXPECT_NE(std::string(e.what()).find("sample count"), std::string::npos);
    }
}

TEST(BinaryIo, BadMagic) {
    ByteWriter w;
    w.bytes("XXXX");
    ByteReader r(w.buffer());
    try {
        r.expect_magic("SGAD");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatError::Kind::bad_magic);
        EXPECT_NE(std::string(e.what()).find("SGAD"), std::string::npos);
    }
}

TEST(BinaryIo, TrailingBytes) {
    ByteWriter w;
    w.u8(1);
    ByteReader r(w.buffer());
    try {
        r.expect_end();
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatError::Kind::corrupt);
    }
}

TEST(BinaryIo, MissingFile) {
    try {
        ByteReader::from_file("/nonexistent/dir/file.bin");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.kind(), FormatError::Kind::io);
    }
}
