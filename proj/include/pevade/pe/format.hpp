#pragma once

#include <cstdint>

// Fixed offsets and sizes of the on-disk PE layout. Only the fields the
// rewriting layer touches are named; everything else is carried verbatim.
namespace pevade::pe {

inline constexpr std::uint16_t kDosMagic = 0x5A4D;  // "MZ"
inline constexpr std::size_t kDosHeaderSize = 0x40;
inline constexpr std::size_t kHeaderOffsetField = 0x3C;  // e_lfanew, u32

inline constexpr std::uint32_t kPeSignature = 0x00004550;  // "PE\0\0"
inline constexpr std::size_t kPeSignatureSize = 4;
inline constexpr std::size_t kCoffHeaderSize = 20;

// COFF field offsets relative to the COFF header start.
inline constexpr std::size_t kCoffNumSections = 2;        // u16
inline constexpr std::size_t kCoffSizeOfOptional = 16;    // u16

inline constexpr std::uint16_t kOptMagicPe32 = 0x10B;
inline constexpr std::uint16_t kOptMagicPe32Plus = 0x20B;
inline constexpr std::size_t kOptSizePe32 = 224;
inline constexpr std::size_t kOptSizePe32Plus = 240;

// Optional-header field offsets relative to the optional header start.
// SectionAlignment through SizeOfHeaders sit at the same offsets in PE32
// and PE32+; only the trailing reserve fields and directories differ.
inline constexpr std::size_t kOptEntryPoint = 16;        // u32
inline constexpr std::size_t kOptSectionAlignment = 32;  // u32
inline constexpr std::size_t kOptFileAlignment = 36;     // u32
inline constexpr std::size_t kOptSizeOfImage = 56;       // u32
inline constexpr std::size_t kOptSizeOfHeaders = 60;     // u32
inline constexpr std::size_t kOptRvaCountPe32 = 92;      // u32
inline constexpr std::size_t kOptRvaCountPe32Plus = 108; // u32
inline constexpr std::size_t kOptDirsPe32 = 96;
inline constexpr std::size_t kOptDirsPe32Plus = 112;
inline constexpr std::size_t kDataDirEntrySize = 8;      // rva u32 + size u32
inline constexpr std::uint32_t kNumDataDirs = 16;
inline constexpr std::uint32_t kSecurityDirIndex = 4;    // certificate table

inline constexpr std::size_t kSectionHeaderSize = 40;
// Section header field offsets relative to the entry start.
inline constexpr std::size_t kSecName = 0;             // 8 bytes
inline constexpr std::size_t kSecVirtualSize = 8;      // u32
inline constexpr std::size_t kSecVirtualAddress = 12;  // u32
inline constexpr std::size_t kSecRawSize = 16;         // u32
inline constexpr std::size_t kSecRawPointer = 20;      // u32
inline constexpr std::size_t kSecCharacteristics = 36; // u32

}  // namespace pevade::pe
