"""命令行前端：配置、溯源与结果落盘。"""
