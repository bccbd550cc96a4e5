# -*- coding: utf-8 -*-
# Generated by the protocol buffer compiler.  DO NOT EDIT!
# NO CHECKED-IN PROTOBUF GENCODE
# source: minecraft.proto
# Protobuf Python Version: 7.35.1
"""Generated protocol buffer code."""
from google.protobuf import descriptor as _descriptor
from google.protobuf import descriptor_pool as _descriptor_pool
from google.protobuf import runtime_version as _runtime_version
from google.protobuf import symbol_database as _symbol_database
from google.protobuf.internal import builder as _builder
_runtime_version.ValidateProtobufRuntimeVersion(
    _runtime_version.Domain.PUBLIC,
    7,
    35,
    1,
    '',
    'minecraft.proto'
)
# @@protoc_insertion_point(imports)

_sym_db = _symbol_database.Default()




DESCRIPTOR = _descriptor_pool.Default().AddSerializedFile(b'\n\x0fminecraft.proto\x12\x0f\x64k.itu.real.ooe\"(\n\x05Point\x12\t\n\x01x\x18\x01 \x01(\x05\x12\t\n\x01y\x18\x02 \x01(\x05\x12\t\n\x01z\x18\x03 \x01(\x05\"\x8e\x01\n\x05\x42lock\x12(\n\x08position\x18\x01 \x01(\x0b\x32\x16.dk.itu.real.ooe.Point\x12(\n\x04type\x18\x02 \x01(\x0e\x32\x1a.dk.itu.real.ooe.BlockType\x12\x31\n\x0borientation\x18\x03 \x01(\x0e\x32\x1c.dk.itu.real.ooe.Orientation\"0\n\x06\x42locks\x12&\n\x06\x62locks\x18\x01 \x03(\x0b\x32\x16.dk.itu.real.ooe.Block\"P\n\x04\x43ube\x12#\n\x03min\x18\x01 \x01(\x0b\x32\x16.dk.itu.real.ooe.Point\x12#\n\x03max\x18\x02 \x01(\x0b\x32\x16.dk.itu.real.ooe.Point\"`\n\x0f\x46illCubeRequest\x12#\n\x04\x63ube\x18\x01 \x01(\x0b\x32\x15.dk.itu.real.ooe.Cube\x12(\n\x04type\x18\x02 \x01(\x0e\x32\x1a.dk.itu.real.ooe.BlockType\"\x07\n\x05\x45mpty*\x91\x07\n\tBlockType\x12\x07\n\x03\x41IR\x10\x00\x12\t\n\x05STONE\x10\x01\x12\x08\n\x04\x44IRT\x10\x02\x12\t\n\x05GRASS\x10\x03\x12\x0f\n\x0b\x43OBBLESTONE\x10\x04\x12\n\n\x06PLANKS\x10\x05\x12\t\n\x05GLASS\x10\x06\x12\t\n\x05SLIME\x10\x07\x12\n\n\x06PISTON\x10\x08\x12\x11\n\rSTICKY_PISTON\x10\t\x12\x12\n\x0eREDSTONE_BLOCK\x10\n\x12\x0c\n\x08OBSERVER\x10\x0b\x12\x07\n\x03LOG\x10\x0c\x12\n\n\x06LEAVES\x10\r\x12\x0f\n\x0b\x42RICK_BLOCK\x10\x0e\x12\x0e\n\nSTONEBRICK\x10\x0f\x12\r\n\tSANDSTONE\x10\x10\x12\x08\n\x04WOOL\x10\x11\x12\x08\n\x04\x43LAY\x10\x12\x12\x11\n\rHARDENED_CLAY\x10\x13\x12\x19\n\x15STAINED_HARDENED_CLAY\x10\x14\x12\x11\n\rSTAINED_GLASS\x10\x15\x12\r\n\tGLOWSTONE\x10\x16\x12\x0e\n\nIRON_BLOCK\x10\x17\x12\x0e\n\nGOLD_BLOCK\x10\x18\x12\x11\n\rDIAMOND_BLOCK\x10\x19\x12\x11\n\rEMERALD_BLOCK\x10\x1a\x12\x10\n\x0cQUARTZ_BLOCK\x10\x1b\x12\x0c\n\x08OBSIDIAN\x10\x1c\x12\x08\n\x04LAVA\x10\x1d\x12\t\n\x05WATER\x10\x1e\x12\x07\n\x03TNT\x10\x1f\x12\x0c\n\x08\x43ONCRETE\x10 \x12\x13\n\x0f\x43ONCRETE_POWDER\x10!\x12\t\n\x05TORCH\x10\"\x12\x11\n\rREDSTONE_WIRE\x10#\x12\x12\n\x0eREDSTONE_TORCH\x10$\x12\r\n\tDISPENSER\x10%\x12\x11\n\rTRIPWIRE_HOOK\x10&\x12\t\n\x05\x46\x45NCE\x10\'\x12\x0e\n\nOAK_STAIRS\x10(\x12\x10\n\x0cSTONE_STAIRS\x10)\x12\x0f\n\x0bWOODEN_SLAB\x10*\x12\x0e\n\nSTONE_SLAB\x10+\x12\t\n\x05\x43HEST\x10,\x12\x12\n\x0e\x43RAFTING_TABLE\x10-\x12\x0b\n\x07\x46URNACE\x10.\x12\r\n\tBOOKSHELF\x10/\x12\x0f\n\x0bWOODEN_DOOR\x10\x30\x12\n\n\x06LADDER\x10\x31\x12\x15\n\x11MOSSY_COBBLESTONE\x10\x32\x12\x08\n\x04VINE\x10\x33\x12\t\n\x05LEVER\x10\x34\x12\x08\n\x04SAND\x10\x35\x12\n\n\x06GRAVEL\x10\x36\x12\t\n\x05\x41NVIL\x10\x37\x12\x0c\n\x08\x43\x41ULDRON\x10\x38\x12\r\n\tIRON_BARS\x10\x39\x12\x0e\n\nGLASS_PANE\x10:\x12\n\n\x06\x43\x41RPET\x10;\x12\x07\n\x03\x42\x45\x44\x10<\x12\x0e\n\nFLOWER_POT\x10=*I\n\x0bOrientation\x12\t\n\x05NORTH\x10\x00\x12\x08\n\x04WEST\x10\x01\x12\t\n\x05SOUTH\x10\x02\x12\x08\n\x04\x45\x41ST\x10\x03\x12\x06\n\x02UP\x10\x04\x12\x08\n\x04\x44OWN\x10\x05\x32\xd4\x01\n\x10MinecraftService\x12>\n\x0bspawnBlocks\x12\x17.dk.itu.real.ooe.Blocks\x1a\x16.dk.itu.real.ooe.Empty\x12:\n\x08readCube\x12\x15.dk.itu.real.ooe.Cube\x1a\x17.dk.itu.real.ooe.Blocks\x12\x44\n\x08\x66illCube\x12 .dk.itu.real.ooe.FillCubeRequest\x1a\x16.dk.itu.real.ooe.Emptyb\x06proto3')

_globals = globals()
_builder.BuildMessageAndEnumDescriptors(DESCRIPTOR, _globals)
_builder.BuildTopDescriptorsAndMessages(DESCRIPTOR, 'minecraft_pb2', _globals)
if not _descriptor._USE_C_DESCRIPTORS:
  DESCRIPTOR._loaded_options = None
  _globals['_BLOCKTYPE']._serialized_start=463
  _globals['_BLOCKTYPE']._serialized_end=1376
  _globals['_ORIENTATION']._serialized_start=1378
  _globals['_ORIENTATION']._serialized_end=1451
  _globals['_POINT']._serialized_start=36
  _globals['_POINT']._serialized_end=76
  _globals['_BLOCK']._serialized_start=79
  _globals['_BLOCK']._serialized_end=221
  _globals['_BLOCKS']._serialized_start=223
  _globals['_BLOCKS']._serialized_end=271
  _globals['_CUBE']._serialized_start=273
  _globals['_CUBE']._serialized_end=353
  _globals['_FILLCUBEREQUEST']._serialized_start=355
  _globals['_FILLCUBEREQUEST']._serialized_end=451
  _globals['_EMPTY']._serialized_start=453
  _globals['_EMPTY']._serialized_end=460
  _globals['_MINECRAFTSERVICE']._serialized_start=1454
  _globals['_MINECRAFTSERVICE']._serialized_end=1666
# @@protoc_insertion_point(module_scope)
