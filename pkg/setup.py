from setuptools import setup
setup(
    name = "adasgate",
    packages = ["adasgate"],
    version = "0.1",
    description = "Evidence-gated authorisation, certificates and transparency log for AI deployments",
    keywords = ["ai governance", "authorisation", "certificates", "transparency log", "merkle"],
    python_requires = ">=3.8",
    install_requires = [
        "cryptography>=3.1",
        "click>=8.2",
        "structlog>=21.1",
        "fastapi>=0.95",
        "uvicorn>=0.20",
    ],
    extras_require = {
        "test": ["pytest>=7", "httpx>=0.24"],
        "docs": ["sphinx"],
    },
    entry_points = {
        "console_scripts": ["adas = adasgate.adas_cli:main"],
    },
    classifiers = [
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Intended Audience :: Developers",
        "License :: Public Domain",
        "Operating System :: POSIX",
        "Topic :: Security :: Cryptography",
        "Topic :: Software Development :: Libraries :: Python Modules",
        ]
)
